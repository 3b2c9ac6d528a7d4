//! Seeded multi-agent scene generator with known dynamics.
//!
//! Each agent follows one of three motion models: constant velocity,
//! constant turn rate, or stop-and-go (speed halved over a random contiguous
//! span). Gaussian observation noise is added to observed positions only, so
//! ground-truth futures stay on the noiseless path. An optional corrupted
//! observed step receives extra noise, which makes dropping that step useful.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::RandomSource;
use crate::types::{Dataset, FutureWindow, ObservedWindow, Scene, Split, Tracks, Waypoint};

/// Maximum absolute turn rate in radians per step.
pub const MAX_TURN_RATE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionMix {
    pub linear: f64,
    pub turning: f64,
    pub stop_and_go: f64,
}

impl MotionMix {
    pub const LINEAR: MotionMix = MotionMix {
        linear: 1.0,
        turning: 0.0,
        stop_and_go: 0.0,
    };

    pub fn even() -> Self {
        MotionMix {
            linear: 1.0 / 3.0,
            turning: 1.0 / 3.0,
            stop_and_go: 1.0 / 3.0,
        }
    }

    fn check(&self) -> Result<()> {
        let w = [self.linear, self.turning, self.stop_and_go];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CoreError::invalid(format!(
                "motion weights must be nonnegative and sum to 1, got {w:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    Linear,
    Turning,
    StopAndGo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub scene_count: usize,
    pub agents_min: usize,
    pub agents_max: usize,
    pub n_obs: usize,
    pub m_pred: usize,
    pub frame_interval: f64,
    pub motion_mix: MotionMix,
    pub noise_sigma: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// 1-based observed step that receives extra noise.
    pub corrupt_step: Option<usize>,
    pub corrupt_sigma: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            scene_count: 100,
            agents_min: 1,
            agents_max: 4,
            n_obs: 8,
            m_pred: 12,
            frame_interval: 0.4,
            motion_mix: MotionMix::even(),
            noise_sigma: 0.05,
            speed_min: 0.2,
            speed_max: 0.8,
            corrupt_step: None,
            corrupt_sigma: 0.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn check(&self) -> Result<()> {
        self.motion_mix.check()?;
        if self.scene_count == 0 {
            return Err(CoreError::invalid("scene_count must be at least 1"));
        }
        if self.agents_min == 0 || self.agents_min > self.agents_max {
            return Err(CoreError::invalid("need 1 <= agents_min <= agents_max"));
        }
        if self.n_obs < 2 || self.m_pred == 0 {
            return Err(CoreError::invalid("need n_obs >= 2 and m_pred >= 1"));
        }
        if !(self.frame_interval > 0.0 && self.frame_interval.is_finite()) {
            return Err(CoreError::invalid("frame interval must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(CoreError::invalid("noise_sigma must be >= 0"));
        }
        if !(self.corrupt_sigma >= 0.0 && self.corrupt_sigma.is_finite()) {
            return Err(CoreError::invalid("corrupt_sigma must be >= 0"));
        }
        if !(self.speed_min >= 0.0 && self.speed_min < self.speed_max && self.speed_max.is_finite()) {
            return Err(CoreError::invalid("need 0 <= speed_min < speed_max"));
        }
        if let Some(k) = self.corrupt_step {
            if k == 0 || k > self.n_obs {
                return Err(CoreError::invalid(format!(
                    "corrupt_step {k} outside 1..={}",
                    self.n_obs
                )));
            }
        }
        Ok(())
    }
}

/// Noiseless path of `len` positions for one motion model.
pub fn motion_path(
    model: MotionModel,
    start: Waypoint,
    heading: f64,
    speed: f64,
    turn_rate: f64,
    slow_span: (usize, usize),
    len: usize,
) -> Vec<Waypoint> {
    let mut out = Vec::with_capacity(len);
    let mut pos = start;
    out.push(pos);
    for t in 0..len.saturating_sub(1) {
        let (dir, s) = match model {
            MotionModel::Linear => (heading, speed),
            MotionModel::Turning => (heading + turn_rate * t as f64, speed),
            MotionModel::StopAndGo => {
                let slow = (slow_span.0..slow_span.1).contains(&t);
                (heading, if slow { 0.5 * speed } else { speed })
            }
        };
        pos = pos + Waypoint::new(dir.cos(), dir.sin()) * s;
        out.push(pos);
    }
    out
}

fn sample_model(src: &mut RandomSource, mix: &MotionMix) -> MotionModel {
    let u = src.next_f64();
    if u < mix.linear {
        MotionModel::Linear
    } else if u < mix.linear + mix.turning {
        MotionModel::Turning
    } else {
        MotionModel::StopAndGo
    }
}

fn generate_scene(cfg: &GenConfig, src: &mut RandomSource) -> Result<Scene> {
    let span = cfg.agents_max - cfg.agents_min + 1;
    let agents = cfg.agents_min + src.uniform_index(span)? - 1;
    let total = cfg.n_obs + cfg.m_pred;
    let mut observed = Vec::with_capacity(agents);
    let mut future = Vec::with_capacity(agents);
    for _ in 0..agents {
        let model = sample_model(src, &cfg.motion_mix);
        let start = Waypoint::new(src.uniform_real(-10.0, 10.0)?, src.uniform_real(-10.0, 10.0)?);
        let heading = src.uniform_real(0.0, std::f64::consts::TAU)?;
        let speed = src.uniform_real(cfg.speed_min, cfg.speed_max)?;
        let turn_rate = src.uniform_real(-MAX_TURN_RATE, MAX_TURN_RATE)?;
        let slow_start = src.uniform_index(total - 1)? - 1;
        let slow_len = src.uniform_index((total / 2).max(1))?;
        let path = motion_path(
            model,
            start,
            heading,
            speed,
            turn_rate,
            (slow_start, slow_start + slow_len),
            total,
        );
        let mut obs: Vec<Waypoint> = path[..cfg.n_obs].to_vec();
        for (t, p) in obs.iter_mut().enumerate() {
            let mut sigma = cfg.noise_sigma;
            if cfg.corrupt_step == Some(t + 1) {
                sigma = sigma.hypot(cfg.corrupt_sigma);
            }
            if sigma > 0.0 {
                *p = *p + Waypoint::new(src.standard_normal(), src.standard_normal()) * sigma;
            }
        }
        observed.push(obs);
        future.push(path[cfg.n_obs..].to_vec());
    }
    Scene::new(
        ObservedWindow::anonymous(Tracks::new(observed)?),
        FutureWindow::new(Tracks::new(future)?),
        cfg.frame_interval,
    )
}

/// Generates `cfg.scene_count` scenes, each from its own forked stream.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.check()?;
    let root = RandomSource::new(cfg.seed);
    let scenes = (0..cfg.scene_count)
        .map(|i| generate_scene(cfg, &mut root.fork_indexed("scene", i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(scenes, Split::Train)
}

/// Seeded shuffle, then cut into train / validation / test.
pub fn split(dataset: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(*f > 0.0 && f.is_finite())) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(CoreError::invalid(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let total = dataset.len();
    let n_train = (a * total as f64).round() as usize;
    let n_val = (b * total as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= total {
        return Err(CoreError::invalid(format!(
            "split {fractions:?} of {total} scenes leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    RandomSource::new(seed).fork("split").shuffle(&mut order);
    let pick =
        |idx: &[usize], tag: Split| Dataset::new(idx.iter().map(|&i| dataset.scenes()[i].clone()).collect(), tag);
    Ok((
        pick(&order[..n_train], Split::Train)?,
        pick(&order[n_train..n_train + n_val], Split::Validation)?,
        pick(&order[n_train + n_val..], Split::Test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ade;
    use crate::predictors::predict_constant_velocity;
    use crate::types::validate_scene;

    fn linear_cfg() -> GenConfig {
        GenConfig {
            scene_count: 50,
            motion_mix: MotionMix::LINEAR,
            noise_sigma: 0.0,
            seed: 4,
            ..GenConfig::default()
        }
    }

    #[test]
    fn noiseless_linear_is_constant_velocity() {
        let ds = generate(&linear_cfg()).unwrap();
        for s in ds.scenes() {
            let pred = predict_constant_velocity(s.observed(), s.future().len()).unwrap();
            assert!(ade(&pred.samples()[0], s.future()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let cfg = GenConfig {
            scene_count: 30,
            seed: 9,
            ..GenConfig::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        for s in a.scenes() {
            assert_eq!(validate_scene(s), Ok(()));
            let (n_agents, n, m) = s.dimensions();
            assert!((1..=4).contains(&n_agents));
            assert_eq!((n, m), (8, 12));
        }
        let other = generate(&GenConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn noiseless_models_continue_in_closed_form() {
        let start = Waypoint::new(1.0, 2.0);
        // Turning: every step has length `speed` and heading advances by the turn rate.
        let p = motion_path(MotionModel::Turning, start, 0.3, 0.7, 0.1, (0, 0), 20);
        for (t, w) in p.windows(2).enumerate() {
            let d = w[1] - w[0];
            assert!((d.norm() - 0.7).abs() < 1e-12);
            let ang = 0.3 + 0.1 * t as f64;
            assert!((d.x - 0.7 * ang.cos()).abs() < 1e-12);
        }
        let q = motion_path(MotionModel::StopAndGo, start, 0.0, 1.0, 0.0, (3, 6), 10);
        let steps: Vec<f64> = q.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        for (t, s) in steps.iter().enumerate() {
            let expect = if (3..6).contains(&t) { 0.5 } else { 1.0 };
            assert!((s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_configs() {
        let mut cfg = GenConfig::default();
        cfg.motion_mix.linear = 0.5;
        assert!(generate(&cfg).is_err());
        let cfg = GenConfig {
            noise_sigma: -1.0,
            ..GenConfig::default()
        };
        assert!(generate(&cfg).is_err());
        let cfg = GenConfig {
            corrupt_step: Some(9),
            ..GenConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn split_sizes_and_coverage() {
        let ds = generate(&GenConfig {
            scene_count: 100,
            ..linear_cfg()
        })
        .unwrap();
        let (tr, va, te) = split(&ds, (0.8, 0.1, 0.1), 5).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
        assert_eq!(tr.split(), Split::Train);
        assert_eq!(va.split(), Split::Validation);
        assert_eq!(te.split(), Split::Test);

        // Union equals the original multiset (scenes are distinguishable by start point).
        let key = |s: &Scene| {
            let p = s.observed().agent(0)[0];
            (p.x.to_bits(), p.y.to_bits())
        };
        let mut all: Vec<_> = tr
            .scenes()
            .iter()
            .chain(va.scenes())
            .chain(te.scenes())
            .map(key)
            .collect();
        let mut orig: Vec<_> = ds.scenes().iter().map(key).collect();
        all.sort_unstable();
        orig.sort_unstable();
        assert_eq!(all, orig);

        let again = split(&ds, (0.8, 0.1, 0.1), 5).unwrap();
        assert_eq!(again.0, tr);
        assert_eq!(again.2, te);
    }

    #[test]
    fn split_rejects_empty_parts() {
        let ds = generate(&GenConfig {
            scene_count: 5,
            ..linear_cfg()
        })
        .unwrap();
        assert!(split(&ds, (0.9, 0.05, 0.05), 1).is_err());
        assert!(split(&ds, (0.5, 0.5, 0.0), 1).is_err());
        assert!(split(&ds, (0.5, 0.3, 0.3), 1).is_err());
    }
}
