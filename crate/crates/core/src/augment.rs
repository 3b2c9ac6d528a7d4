//! Temporal waypoint dropping.
//!
//! A drop removes the waypoint at one timestamp `k` from *every* agent of the
//! observed window. Stochastic drops draw `k` uniformly; repeated drops resample
//! over the shrinking window. Front-padding repeats each agent's earliest
//! surviving waypoint until the original length is restored, so later
//! displacements are left untouched. The future window is never modified.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::metrics::{dataset_metrics, EvalSpec, Metric};
use crate::predictors::Forecaster;
use crate::rng::RandomSource;
use crate::types::{Dataset, ObservedWindow, Scene, Waypoint};

/// How many waypoints to drop and whether to restore the original length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropConfig {
    pub drops: usize,
    pub pad_to_original: bool,
}

impl DropConfig {
    pub fn new(drops: usize) -> Self {
        DropConfig {
            drops,
            pad_to_original: true,
        }
    }

    pub fn single() -> Self {
        DropConfig::new(1)
    }

    /// Rejects `drops >= n`.
    pub fn check(&self, n: usize) -> Result<()> {
        if self.drops >= n {
            return Err(CoreError::invalid(format!(
                "cannot drop {} waypoints from a window of {n}: need D < n",
                self.drops
            )));
        }
        Ok(())
    }
}

impl Default for DropConfig {
    fn default() -> Self {
        DropConfig::single()
    }
}

/// Original 1-based timestamps removed, in drop order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub dropped_indices: Vec<usize>,
}

/// Removes timestamp `k` (1-based) from every agent.
pub fn drop_index(window: &ObservedWindow, k: usize) -> Result<ObservedWindow> {
    let n = window.len();
    if n < 2 {
        return Err(CoreError::invalid(format!("window of length {n} has nothing to drop")));
    }
    if k == 0 || k > n {
        return Err(CoreError::invalid(format!("drop index {k} outside 1..={n}")));
    }
    let tracks = window.map_agents(|seq| {
        let mut out = Vec::with_capacity(n - 1);
        out.extend_from_slice(&seq[..k - 1]);
        out.extend_from_slice(&seq[k..]);
        out
    })?;
    window.with_tracks(tracks)
}

/// Prepends copies of each agent's earliest waypoint until `target_len`.
pub fn pad_front(window: &ObservedWindow, target_len: usize) -> Result<ObservedWindow> {
    let len = window.len();
    if len > target_len {
        return Err(CoreError::invalid(format!(
            "window of length {len} is longer than pad target {target_len}"
        )));
    }
    if len == target_len {
        return Ok(window.clone());
    }
    let tracks = window.map_agents(|seq| {
        let mut out: Vec<Waypoint> = vec![seq[0]; target_len - len];
        out.extend_from_slice(seq);
        out
    })?;
    window.with_tracks(tracks)
}

fn finish(scene: &Scene, observed: ObservedWindow, n: usize, pad: bool) -> Result<Scene> {
    let observed = if pad { pad_front(&observed, n)? } else { observed };
    Ok(scene.with_observed(observed))
}

/// One stochastic drop with `k` uniform over `1..=n`.
pub fn twd_single(scene: &Scene, src: &mut RandomSource, cfg: DropConfig) -> Result<(Scene, DropRecord)> {
    let n = scene.observed().len();
    if n < 2 {
        return Err(CoreError::invalid("stochastic drop needs n >= 2"));
    }
    let k = src.uniform_index(n)?;
    let dropped = drop_index(scene.observed(), k)?;
    let out = finish(scene, dropped, n, cfg.pad_to_original)?;
    Ok((
        out,
        DropRecord {
            dropped_indices: vec![k],
        },
    ))
}

/// `cfg.drops` successive stochastic drops, each drawn over the current
/// length. Padding, when enabled, is applied once at the end.
pub fn twd_multi(scene: &Scene, src: &mut RandomSource, cfg: DropConfig) -> Result<(Scene, DropRecord)> {
    let n = scene.observed().len();
    if cfg.drops == 0 {
        return Err(CoreError::invalid("multi-drop needs D >= 1"));
    }
    cfg.check(n)?;
    let mut window = scene.observed().clone();
    let mut original: Vec<usize> = (1..=n).collect();
    let mut record = DropRecord::default();
    for _ in 0..cfg.drops {
        let k = src.uniform_index(window.len())?;
        window = drop_index(&window, k)?;
        record.dropped_indices.push(original.remove(k - 1));
    }
    Ok((finish(scene, window, n, cfg.pad_to_original)?, record))
}

/// Dispatches on `cfg.drops`: zero is the identity, one is a single drop,
/// more is a multi-drop.
pub fn twd(scene: &Scene, src: &mut RandomSource, cfg: DropConfig) -> Result<(Scene, DropRecord)> {
    cfg.check(scene.observed().len())?;
    match cfg.drops {
        0 => Ok((scene.clone(), DropRecord::default())),
        1 => twd_single(scene, src, cfg),
        _ => twd_multi(scene, src, cfg),
    }
}

/// Deterministic drop of timestamp `k` followed by front-padding.
pub fn apply_fixed_drop(scene: &Scene, k: usize) -> Result<Scene> {
    let n = scene.observed().len();
    let dropped = drop_index(scene.observed(), k)?;
    finish(scene, dropped, n, true)
}

/// [`apply_fixed_drop`] over a whole dataset.
pub fn fixed_drop_dataset(dataset: &Dataset, k: usize) -> Result<Dataset> {
    dataset.map_scenes(|s| apply_fixed_drop(s, k))
}

/// Which validation score counts as best when choosing a fixed drop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KObjective {
    /// Lowest error (best quality).
    #[default]
    MinError,
    /// Highest error, the literal arg-max reading.
    MaxError,
}

impl std::str::FromStr for KObjective {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-error" => Ok(KObjective::MinError),
            "max-error" => Ok(KObjective::MaxError),
            other => Err(CoreError::invalid(format!(
                "unknown fixed-k objective `{other}` (expected min-error or max-error)"
            ))),
        }
    }
}

impl std::fmt::Display for KObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KObjective::MinError => "min-error",
            KObjective::MaxError => "max-error",
        })
    }
}

/// Validation scores for one candidate drop index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub ade: f64,
    pub fde: f64,
}

impl KScore {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Ade => self.ade,
            Metric::Fde => self.fde,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedKSelection {
    pub k: usize,
    pub scores: Vec<KScore>,
}

/// Scores every fixed drop `k in 1..=n` on `validation` and returns the best
/// one under `objective`. Ties go to the smallest `k`.
pub fn select_fixed_k(
    predictor: &dyn Forecaster,
    validation: &Dataset,
    metric: Metric,
    samples: usize,
    objective: KObjective,
) -> Result<FixedKSelection> {
    select_fixed_k_with(predictor, validation, metric, &EvalSpec::new(samples), objective)
}

/// [`select_fixed_k`] with full evaluation options.
pub fn select_fixed_k_with(
    predictor: &dyn Forecaster,
    validation: &Dataset,
    metric: Metric,
    spec: &EvalSpec,
    objective: KObjective,
) -> Result<FixedKSelection> {
    let n = validation.n_obs();
    let spec = EvalSpec {
        horizons: Vec::new(),
        ..spec.clone()
    };
    let mut scores = Vec::with_capacity(n);
    for k in 1..=n {
        let dropped = fixed_drop_dataset(validation, k)?;
        let report = dataset_metrics(predictor, &dropped, &spec)?;
        scores.push(KScore {
            k,
            ade: report.min_ade,
            fde: report.min_fde,
        });
    }
    let mut best = scores[0];
    for s in &scores[1..] {
        let better = match objective {
            KObjective::MinError => s.get(metric) < best.get(metric),
            KObjective::MaxError => s.get(metric) > best.get(metric),
        };
        if better {
            best = *s;
        }
    }
    Ok(FixedKSelection { k: best.k, scores })
}
