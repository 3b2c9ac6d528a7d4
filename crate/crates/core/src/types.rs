//! Trajectory containers shared by every other module.
//!
//! All positions are world-frame meters. Timestamps are implicit: an observed
//! window of length `n` covers indices `1..=n`, and the paired future window of
//! length `m` covers `n+1..=n+m`, spaced by the scene's `frame_interval`.

use std::fmt;
use std::ops::{Add, Deref, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One 2D world-coordinate position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub const ORIGIN: Waypoint = Waypoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Waypoint { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Waypoint) -> f64 {
        (*self - *other).norm()
    }
}

impl Add for Waypoint {
    type Output = Waypoint;
    fn add(self, rhs: Waypoint) -> Waypoint {
        Waypoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Waypoint {
    type Output = Waypoint;
    fn sub(self, rhs: Waypoint) -> Waypoint {
        Waypoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Waypoint {
    type Output = Waypoint;
    fn mul(self, rhs: f64) -> Waypoint {
        Waypoint::new(self.x * rhs, self.y * rhs)
    }
}

impl From<(f64, f64)> for Waypoint {
    fn from((x, y): (f64, f64)) -> Self {
        Waypoint::new(x, y)
    }
}

/// Opaque agent identity, preserved through augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A rectangular block of `agents × len` waypoints, stored agent-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tracks {
    agents: usize,
    len: usize,
    points: Vec<Waypoint>,
}

impl Tracks {
    /// Builds from one sequence per agent. Every sequence must have the same,
    /// nonzero length and there must be at least one agent.
    pub fn new(per_agent: Vec<Vec<Waypoint>>) -> Result<Self> {
        let agents = per_agent.len();
        if agents == 0 {
            return Err(CoreError::shape("at least one agent required"));
        }
        let len = per_agent[0].len();
        if len == 0 {
            return Err(CoreError::shape("sequences must be nonempty"));
        }
        if let Some((i, seq)) = per_agent.iter().enumerate().find(|(_, s)| s.len() != len) {
            return Err(CoreError::shape(format!(
                "agent {i} has {} waypoints, expected {len}",
                seq.len()
            )));
        }
        Ok(Tracks {
            agents,
            len,
            points: per_agent.into_iter().flatten().collect(),
        })
    }

    /// Builds from an agent-major flat buffer.
    pub fn from_flat(agents: usize, len: usize, points: Vec<Waypoint>) -> Result<Self> {
        if agents == 0 || len == 0 {
            return Err(CoreError::shape("tracks need at least one agent and one step"));
        }
        if points.len() != agents * len {
            return Err(CoreError::shape(format!(
                "{} points cannot form {agents}x{len} tracks",
                points.len()
            )));
        }
        Ok(Tracks { agents, len, points })
    }

    /// Convenience for tests and examples: one `(x, y)` list per agent.
    pub fn from_xy(per_agent: &[&[(f64, f64)]]) -> Result<Self> {
        Tracks::new(
            per_agent
                .iter()
                .map(|seq| seq.iter().copied().map(Waypoint::from).collect())
                .collect(),
        )
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    /// Number of timestamps per agent.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn agent(&self, i: usize) -> &[Waypoint] {
        &self.points[i * self.len..(i + 1) * self.len]
    }

    pub fn iter_agents(&self) -> impl ExactSizeIterator<Item = &[Waypoint]> + '_ {
        self.points.chunks_exact(self.len)
    }

    pub fn points(&self) -> &[Waypoint] {
        &self.points
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(Waypoint::is_finite)
    }

    /// Applies `f` to each agent sequence. `f` must return sequences of equal length.
    pub fn map_agents<F>(&self, mut f: F) -> Result<Tracks>
    where
        F: FnMut(&[Waypoint]) -> Vec<Waypoint>,
    {
        Tracks::new(self.iter_agents().map(&mut f).collect())
    }

    /// Keeps only the first `prefix` timestamps.
    pub fn truncated(&self, prefix: usize) -> Result<Tracks> {
        if prefix == 0 || prefix > self.len {
            return Err(CoreError::invalid(format!("prefix {prefix} outside 1..={}", self.len)));
        }
        self.map_agents(|seq| seq[..prefix].to_vec())
    }

    /// Shifts every waypoint by `offset`.
    pub fn translated(&self, offset: Waypoint) -> Tracks {
        Tracks {
            agents: self.agents,
            len: self.len,
            points: self.points.iter().map(|p| *p + offset).collect(),
        }
    }
}

/// The past waypoints of every agent in a scene.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedWindow {
    ids: Vec<AgentId>,
    tracks: Tracks,
}

impl ObservedWindow {
    pub fn new(ids: Vec<AgentId>, tracks: Tracks) -> Result<Self> {
        if ids.len() != tracks.agents() {
            return Err(CoreError::shape(format!(
                "{} agent ids for {} tracks",
                ids.len(),
                tracks.agents()
            )));
        }
        Ok(ObservedWindow { ids, tracks })
    }

    /// Window with ids `0..N`.
    pub fn anonymous(tracks: Tracks) -> Self {
        let ids = (0..tracks.agents() as u64).map(AgentId).collect();
        ObservedWindow { ids, tracks }
    }

    pub fn agent_ids(&self) -> &[AgentId] {
        &self.ids
    }

    pub fn tracks(&self) -> &Tracks {
        &self.tracks
    }

    /// Same agents, new positions.
    pub fn with_tracks(&self, tracks: Tracks) -> Result<Self> {
        ObservedWindow::new(self.ids.clone(), tracks)
    }
}

impl Deref for ObservedWindow {
    type Target = Tracks;
    fn deref(&self) -> &Tracks {
        &self.tracks
    }
}

/// Ground-truth (or one predicted) future, `N × m`, agent order matching the
/// paired observed window.
#[derive(Clone, Debug, PartialEq)]
pub struct FutureWindow(Tracks);

impl FutureWindow {
    pub fn new(tracks: Tracks) -> Self {
        FutureWindow(tracks)
    }

    pub fn tracks(&self) -> &Tracks {
        &self.0
    }

    pub fn into_tracks(self) -> Tracks {
        self.0
    }
}

impl Deref for FutureWindow {
    type Target = Tracks;
    fn deref(&self) -> &Tracks {
        &self.0
    }
}

impl From<Tracks> for FutureWindow {
    fn from(t: Tracks) -> Self {
        FutureWindow(t)
    }
}

/// `K` sampled futures for one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    samples: Vec<FutureWindow>,
}

impl PredictionSet {
    pub fn new(samples: Vec<FutureWindow>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| CoreError::shape("prediction set needs K >= 1 samples"))?;
        let (n, m) = (first.agents(), first.len());
        if samples.iter().any(|s| s.agents() != n || s.len() != m) {
            return Err(CoreError::shape("prediction samples differ in shape"));
        }
        Ok(PredictionSet { samples })
    }

    pub fn single(sample: FutureWindow) -> Self {
        PredictionSet { samples: vec![sample] }
    }

    /// Number of samples `K`.
    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn agents(&self) -> usize {
        self.samples[0].agents()
    }

    pub fn horizon(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[FutureWindow] {
        &self.samples
    }

    /// The first `k` samples, or all of them when fewer exist.
    pub fn take(&self, k: usize) -> PredictionSet {
        let k = k.clamp(1, self.samples.len());
        PredictionSet {
            samples: self.samples[..k].to_vec(),
        }
    }
}

/// First violated scene invariant.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("non-finite coordinate")]
    NonFiniteCoordinate,
    #[error("agent count mismatch (observed {observed}, future {future})")]
    AgentCountMismatch { observed: usize, future: usize },
    #[error("observed window too short ({0} < 2)")]
    ObservedTooShort(usize),
    #[error("frame interval must be positive and finite, got {0}")]
    BadFrameInterval(f64),
}

/// An observed window paired with its ground-truth future.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    observed: ObservedWindow,
    future: FutureWindow,
    frame_interval: f64,
}

impl Scene {
    /// Builds a scene, rejecting any invariant violation.
    pub fn new(observed: ObservedWindow, future: FutureWindow, frame_interval: f64) -> Result<Self> {
        let scene = Scene::assemble(observed, future, frame_interval);
        validate_scene(&scene)?;
        Ok(scene)
    }

    /// Builds a scene without checking invariants. Use [`validate_scene`] to
    /// inspect the result.
    pub fn assemble(observed: ObservedWindow, future: FutureWindow, frame_interval: f64) -> Self {
        Scene {
            observed,
            future,
            frame_interval,
        }
    }

    pub fn observed(&self) -> &ObservedWindow {
        &self.observed
    }

    pub fn future(&self) -> &FutureWindow {
        &self.future
    }

    pub fn frame_interval(&self) -> f64 {
        self.frame_interval
    }

    /// Same future and timing, different past.
    pub fn with_observed(&self, observed: ObservedWindow) -> Scene {
        Scene {
            observed,
            future: self.future.clone(),
            frame_interval: self.frame_interval,
        }
    }

    /// `(N, n, m)`.
    pub fn dimensions(&self) -> (usize, usize, usize) {
        scene_dimensions(self)
    }
}

/// Returns `(agents, observed length, future length)`.
pub fn scene_dimensions(scene: &Scene) -> (usize, usize, usize) {
    (scene.observed.agents(), scene.observed.len(), scene.future.len())
}

/// Checks scene invariants, reporting the first violation.
pub fn validate_scene(scene: &Scene) -> Result<(), Violation> {
    if !scene.observed.is_finite() || !scene.future.is_finite() {
        return Err(Violation::NonFiniteCoordinate);
    }
    if scene.observed.agents() != scene.future.agents() {
        return Err(Violation::AgentCountMismatch {
            observed: scene.observed.agents(),
            future: scene.future.agents(),
        });
    }
    if scene.observed.len() < 2 {
        return Err(Violation::ObservedTooShort(scene.observed.len()));
    }
    if !(scene.frame_interval.is_finite() && scene.frame_interval > 0.0) {
        return Err(Violation::BadFrameInterval(scene.frame_interval));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// A nonempty collection of scenes that share `(n, m, frame_interval)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    scenes: Vec<Scene>,
    split: Split,
}

impl Dataset {
    pub fn new(scenes: Vec<Scene>, split: Split) -> Result<Self> {
        let first = scenes.first().ok_or(CoreError::EmptyDataset)?;
        let (_, n, m) = first.dimensions();
        let dt = first.frame_interval();
        for (i, s) in scenes.iter().enumerate() {
            let (_, sn, sm) = s.dimensions();
            if sn != n || sm != m || s.frame_interval().to_bits() != dt.to_bits() {
                return Err(CoreError::shape(format!(
                    "scene {i} is ({sn}, {sm}, {}) but dataset is ({n}, {m}, {dt})",
                    s.frame_interval()
                )));
            }
        }
        Ok(Dataset { scenes, split })
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn into_scenes(self) -> Vec<Scene> {
        self.scenes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(self, split: Split) -> Dataset {
        Dataset { split, ..self }
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn n_obs(&self) -> usize {
        self.scenes[0].observed().len()
    }

    pub fn m_pred(&self) -> usize {
        self.scenes[0].future().len()
    }

    pub fn frame_interval(&self) -> f64 {
        self.scenes[0].frame_interval()
    }

    /// Replaces every scene through `f`, keeping the split tag.
    pub fn map_scenes<F>(&self, f: F) -> Result<Dataset>
    where
        F: FnMut(&Scene) -> Result<Scene>,
    {
        let scenes = self.scenes.iter().map(f).collect::<Result<Vec<_>>>()?;
        Dataset::new(scenes, self.split)
    }
}
