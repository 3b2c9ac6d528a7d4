//! Displacement errors, best-of-K aggregation and relative percent difference.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::predictors::Forecaster;
use crate::types::{Dataset, PredictionSet, Tracks};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ade,
    Fde,
}

impl std::str::FromStr for Metric {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ade" => Ok(Metric::Ade),
            "fde" => Ok(Metric::Fde),
            other => Err(CoreError::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Ade => "ade",
            Metric::Fde => "fde",
        })
    }
}

/// Where the minimum over `K` samples is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinMode {
    /// One sample index for the whole scene (standard minADE_K).
    #[default]
    PerScene,
    /// Each agent picks its own best sample.
    PerAgent,
}

impl std::str::FromStr for MinMode {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-scene" => Ok(MinMode::PerScene),
            "per-agent" => Ok(MinMode::PerAgent),
            other => Err(CoreError::invalid(format!("unknown min mode `{other}`"))),
        }
    }
}

fn check_shapes(pred: &Tracks, gt: &Tracks) -> Result<()> {
    if pred.agents() != gt.agents() || pred.len() != gt.len() {
        return Err(CoreError::shape(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.agents(),
            pred.len(),
            gt.agents(),
            gt.len()
        )));
    }
    Ok(())
}

/// Mean Euclidean distance over all `N * m` waypoints.
pub fn ade(pred: &Tracks, gt: &Tracks) -> Result<f64> {
    check_shapes(pred, gt)?;
    let total: f64 = pred.points().iter().zip(gt.points()).map(|(p, g)| p.distance(g)).sum();
    Ok(total / pred.points().len() as f64)
}

/// Mean over agents of the distance at the final timestamp.
pub fn fde(pred: &Tracks, gt: &Tracks) -> Result<f64> {
    check_shapes(pred, gt)?;
    let last = pred.len() - 1;
    let total: f64 = pred
        .iter_agents()
        .zip(gt.iter_agents())
        .map(|(p, g)| p[last].distance(&g[last]))
        .sum();
    Ok(total / pred.agents() as f64)
}

pub fn metric_value(metric: Metric, pred: &Tracks, gt: &Tracks) -> Result<f64> {
    match metric {
        Metric::Ade => ade(pred, gt),
        Metric::Fde => fde(pred, gt),
    }
}

/// Best-of-K, minimized over whole-scene samples.
pub fn min_over_samples(predset: &PredictionSet, gt: &Tracks, metric: Metric) -> Result<f64> {
    min_over_samples_with(predset, gt, metric, MinMode::PerScene)
}

pub fn min_over_samples_with(predset: &PredictionSet, gt: &Tracks, metric: Metric, mode: MinMode) -> Result<f64> {
    match mode {
        MinMode::PerScene => {
            let mut best = f64::INFINITY;
            for s in predset.samples() {
                best = best.min(metric_value(metric, s, gt)?);
            }
            Ok(best)
        }
        MinMode::PerAgent => {
            for s in predset.samples() {
                check_shapes(s, gt)?;
            }
            let mut total = 0.0;
            for a in 0..gt.agents() {
                let g = gt.agent(a);
                let best = predset
                    .samples()
                    .iter()
                    .map(|s| agent_error(metric, s.agent(a), g))
                    .fold(f64::INFINITY, f64::min);
                total += best;
            }
            Ok(total / gt.agents() as f64)
        }
    }
}

fn agent_error(metric: Metric, p: &[crate::types::Waypoint], g: &[crate::types::Waypoint]) -> f64 {
    match metric {
        Metric::Ade => p.iter().zip(g).map(|(a, b)| a.distance(b)).sum::<f64>() / p.len() as f64,
        Metric::Fde => p[p.len() - 1].distance(&g[g.len() - 1]),
    }
}

/// Best-of-K metric on the first `prefix` future timestamps.
pub fn truncated_horizon(predset: &PredictionSet, gt: &Tracks, prefix: usize, metric: Metric) -> Result<f64> {
    truncated_horizon_with(predset, gt, prefix, metric, MinMode::PerScene)
}

pub fn truncated_horizon_with(
    predset: &PredictionSet,
    gt: &Tracks,
    prefix: usize,
    metric: Metric,
    mode: MinMode,
) -> Result<f64> {
    if prefix == 0 || prefix > gt.len() {
        return Err(CoreError::invalid(format!(
            "horizon prefix {prefix} outside 1..={}",
            gt.len()
        )));
    }
    if prefix == gt.len() {
        return min_over_samples_with(predset, gt, metric, mode);
    }
    let samples = predset
        .samples()
        .iter()
        .map(|s| s.truncated(prefix).map(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let cut = PredictionSet::new(samples)?;
    min_over_samples_with(&cut, &gt.truncated(prefix)?, metric, mode)
}

/// Symmetric relative percent difference `|a - b| / ((a + b) / 2) * 100`.
pub fn rd_percent(baseline: f64, ours: f64) -> Result<f64> {
    if !(baseline.is_finite() && ours.is_finite()) || baseline < 0.0 || ours < 0.0 {
        return Err(CoreError::UndefinedInput(format!(
            "relative difference needs finite nonnegative inputs, got ({baseline}, {ours})"
        )));
    }
    let mean = (baseline + ours) / 2.0;
    if mean == 0.0 {
        return Err(CoreError::UndefinedInput("relative difference of two zeros".into()));
    }
    Ok((baseline - ours).abs() / mean * 100.0)
}

/// Converts a horizon in seconds to the number of future steps that covers
/// it, rounding fractional step counts up.
pub fn horizon_steps(seconds: f64, frame_interval: f64, m: usize) -> Result<usize> {
    let steps = seconds / frame_interval;
    let covering = (steps - 1e-9).ceil();
    if !steps.is_finite() || covering < 1.0 || covering > m as f64 {
        return Err(CoreError::invalid(format!(
            "horizon {seconds}s at {frame_interval}s/step falls outside 1..={m} steps"
        )));
    }
    Ok(covering as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon_s: f64,
    pub steps: usize,
    pub min_ade: f64,
    pub min_fde: f64,
}

/// Dataset-level best-of-K errors, overall and per horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub min_ade: f64,
    pub min_fde: f64,
    pub per_horizon: Vec<HorizonMetrics>,
    #[serde(rename = "K")]
    pub k: usize,
    pub scene_count: usize,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Ade => self.min_ade,
            Metric::Fde => self.min_fde,
        }
    }

    /// Header line plus a single data row.
    pub fn to_csv(&self) -> String {
        let mut header = vec![
            "min_ade".to_string(),
            "min_fde".into(),
            "K".into(),
            "scene_count".into(),
        ];
        let mut row = vec![
            self.min_ade.to_string(),
            self.min_fde.to_string(),
            self.k.to_string(),
            self.scene_count.to_string(),
        ];
        for h in &self.per_horizon {
            header.push(format!("ade@{}s", h.horizon_s));
            header.push(format!("fde@{}s", h.horizon_s));
            row.push(h.min_ade.to_string());
            row.push(h.min_fde.to_string());
        }
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}

/// Evaluation options shared by every aggregate evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSpec {
    /// Samples considered per scene (capped by what the predictor emits).
    pub k: usize,
    /// Extra horizons in seconds, increasing.
    pub horizons: Vec<f64>,
    pub min_mode: MinMode,
    /// Worker threads for per-scene evaluation; 1 runs inline.
    pub threads: usize,
}

impl EvalSpec {
    pub fn new(k: usize) -> Self {
        EvalSpec {
            k,
            horizons: Vec::new(),
            min_mode: MinMode::PerScene,
            threads: 1,
        }
    }

    pub fn with_horizons(mut self, horizons: Vec<f64>) -> Self {
        self.horizons = horizons;
        self
    }
}

struct SceneScore {
    k: usize,
    ade: f64,
    fde: f64,
    horizons: Vec<(f64, f64)>,
}

/// Per-scene best-of-K errors averaged over scenes.
pub fn dataset_metrics(predictor: &dyn Forecaster, dataset: &Dataset, spec: &EvalSpec) -> Result<MetricsReport> {
    if spec.k == 0 {
        return Err(CoreError::invalid("K must be at least 1"));
    }
    if spec.horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::invalid("horizons must be strictly increasing"));
    }
    let m = dataset.m_pred();
    let steps = spec
        .horizons
        .iter()
        .map(|&h| horizon_steps(h, dataset.frame_interval(), m))
        .collect::<Result<Vec<_>>>()?;

    let score = |scene: &crate::types::Scene| -> Result<SceneScore> {
        let predset = predictor.forecast(scene.observed(), m)?.take(spec.k);
        let gt = scene.future().tracks();
        let ade = min_over_samples_with(&predset, gt, Metric::Ade, spec.min_mode)?;
        let fde = min_over_samples_with(&predset, gt, Metric::Fde, spec.min_mode)?;
        let horizons = steps
            .iter()
            .map(|&p| {
                Ok((
                    truncated_horizon_with(&predset, gt, p, Metric::Ade, spec.min_mode)?,
                    truncated_horizon_with(&predset, gt, p, Metric::Fde, spec.min_mode)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneScore {
            k: predset.k(),
            ade,
            fde,
            horizons,
        })
    };

    let scores: Vec<SceneScore> = if spec.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| CoreError::invalid(format!("thread pool: {e}")))?;
        pool.install(|| dataset.scenes().par_iter().map(score).collect::<Result<Vec<_>>>())?
    } else {
        dataset.scenes().iter().map(score).collect::<Result<Vec<_>>>()?
    };

    // Sequential reduction keeps the sum order independent of thread count.
    let count = scores.len() as f64;
    let mut min_ade = 0.0;
    let mut min_fde = 0.0;
    let mut per = vec![(0.0, 0.0); steps.len()];
    for s in &scores {
        min_ade += s.ade;
        min_fde += s.fde;
        for (acc, h) in per.iter_mut().zip(&s.horizons) {
            acc.0 += h.0;
            acc.1 += h.1;
        }
    }
    Ok(MetricsReport {
        min_ade: min_ade / count,
        min_fde: min_fde / count,
        per_horizon: spec
            .horizons
            .iter()
            .zip(&steps)
            .zip(per)
            .map(|((&horizon_s, &steps), (a, f))| HorizonMetrics {
                horizon_s,
                steps,
                min_ade: a / count,
                min_fde: f / count,
            })
            .collect(),
        k: scores[0].k,
        scene_count: scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FutureWindow, Waypoint};

    fn t(seqs: &[&[(f64, f64)]]) -> Tracks {
        Tracks::from_xy(seqs).unwrap()
    }

    #[test]
    fn ade_identity_and_offset() {
        let gt = t(&[&[(0.0, 0.0), (1.0, 2.0), (3.0, 1.0)]]);
        assert_eq!(ade(&gt, &gt).unwrap(), 0.0);
        let off = gt.translated(Waypoint::new(3.0, 4.0));
        assert_eq!(ade(&off, &gt).unwrap(), 5.0);
    }

    #[test]
    fn ade_hand_value() {
        let pred = t(&[&[(0.0, 0.0), (1.0, 1.0)]]);
        let gt = t(&[&[(0.0, 0.0), (0.0, 0.0)]]);
        assert_eq!(ade(&pred, &gt).unwrap(), 2f64.sqrt() / 2.0);
    }

    #[test]
    fn fde_uses_only_last_step() {
        let gt = t(&[&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]]);
        let pred = t(&[&[(50.0, -20.0), (99.0, 7.0), (1.0, 1.0)]]);
        assert_eq!(fde(&pred, &gt).unwrap(), 2f64.sqrt());
        assert_eq!(fde(&gt, &gt).unwrap(), 0.0);
    }

    #[test]
    fn fde_averages_agents() {
        let gt = t(&[&[(0.0, 0.0)], &[(0.0, 0.0)]]);
        let pred = t(&[&[(1.0, 0.0)], &[(0.0, 3.0)]]);
        assert_eq!(fde(&pred, &gt).unwrap(), 2.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = t(&[&[(0.0, 0.0), (1.0, 0.0)]]);
        let b = t(&[&[(0.0, 0.0)]]);
        assert!(matches!(ade(&a, &b), Err(CoreError::ShapeMismatch(_))));
        assert!(fde(&a, &b).is_err());
    }

    fn offsets(gt: &Tracks, shifts: &[f64]) -> PredictionSet {
        PredictionSet::new(
            shifts
                .iter()
                .map(|&d| FutureWindow::new(gt.translated(Waypoint::new(d, 0.0))))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn min_over_samples_cases() {
        let gt = t(&[&[(0.0, 0.0), (1.0, 0.0)]]);
        assert_eq!(
            min_over_samples(&offsets(&gt, &[2.0, 0.0]), &gt, Metric::Ade).unwrap(),
            0.0
        );
        assert_eq!(
            min_over_samples(&offsets(&gt, &[1.5]), &gt, Metric::Ade).unwrap(),
            ade(&gt.translated(Waypoint::new(1.5, 0.0)), &gt).unwrap()
        );
        assert_eq!(
            min_over_samples(&offsets(&gt, &[2.0, 0.5, 1.1]), &gt, Metric::Ade).unwrap(),
            0.5
        );
    }

    #[test]
    fn per_agent_min_never_exceeds_per_scene() {
        let gt = t(&[&[(0.0, 0.0)], &[(0.0, 0.0)]]);
        let s1 = FutureWindow::new(t(&[&[(0.0, 0.0)], &[(4.0, 0.0)]]));
        let s2 = FutureWindow::new(t(&[&[(4.0, 0.0)], &[(0.0, 0.0)]]));
        let set = PredictionSet::new(vec![s1, s2]).unwrap();
        assert_eq!(min_over_samples(&set, &gt, Metric::Ade).unwrap(), 2.0);
        assert_eq!(
            min_over_samples_with(&set, &gt, Metric::Ade, MinMode::PerAgent).unwrap(),
            0.0
        );
    }

    #[test]
    fn truncation() {
        let gt = t(&[
            &[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
            &[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)],
        ]);
        let pred = FutureWindow::new(t(&[
            &[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)],
            &[(3.0, 0.0), (2.0, 0.0), (1.0, 0.0)],
        ]));
        let set = PredictionSet::single(pred);
        assert_eq!(
            truncated_horizon(&set, &gt, 3, Metric::Ade).unwrap(),
            min_over_samples(&set, &gt, Metric::Ade).unwrap()
        );
        assert_eq!(truncated_horizon(&set, &gt, 1, Metric::Ade).unwrap(), 2.0);
        assert_eq!(truncated_horizon(&set, &gt, 2, Metric::Fde).unwrap(), 2.0);
        assert!(truncated_horizon(&set, &gt, 0, Metric::Ade).is_err());
        assert!(truncated_horizon(&set, &gt, 4, Metric::Ade).is_err());
    }

    #[test]
    fn nba_horizon_steps() {
        assert_eq!(horizon_steps(2.0, 0.4, 10).unwrap(), 5);
        assert_eq!(horizon_steps(4.0, 0.4, 10).unwrap(), 10);
        assert_eq!(horizon_steps(1.0, 0.4, 10).unwrap(), 3);
        assert_eq!(horizon_steps(3.0, 0.4, 10).unwrap(), 8);
        assert_eq!(horizon_steps(4.8, 0.4, 12).unwrap(), 12);
        assert!(horizon_steps(4.4, 0.4, 10).is_err());
        assert!(horizon_steps(0.0, 0.4, 10).is_err());
    }

    #[test]
    fn rd_examples() {
        let r = |a: f64, b: f64| (rd_percent(a, b).unwrap() * 10.0).round() / 10.0;
        assert_eq!(r(0.128, 0.105), 19.7);
        assert_eq!(r(1.13, 0.92), 20.5);
        assert_eq!(r(1.69, 1.19), 34.7);
        assert_eq!(rd_percent(0.7, 0.7).unwrap(), 0.0);
        assert!(matches!(rd_percent(0.0, 0.0), Err(CoreError::UndefinedInput(_))));
        assert!(rd_percent(-1.0, 0.5).is_err());
    }

    #[test]
    fn single_step_fde_equals_ade() {
        let gt = t(&[&[(0.0, 0.0)], &[(1.0, 1.0)]]);
        let pred = t(&[&[(0.3, 0.0)], &[(2.0, -1.0)]]);
        assert_eq!(ade(&pred, &gt).unwrap(), fde(&pred, &gt).unwrap());
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let r = MetricsReport {
            min_ade: 0.5,
            min_fde: 1.0,
            per_horizon: vec![HorizonMetrics {
                horizon_s: 2.0,
                steps: 5,
                min_ade: 0.25,
                min_fde: 0.5,
            }],
            k: 20,
            scene_count: 3,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["K", "min_ade", "min_fde", "per_horizon", "scene_count"]);
        assert_eq!(MetricsReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "min_ade,min_fde,K,scene_count,ade@2s,fde@2s");
        assert_eq!(lines[1], "0.5,1,20,3,0.25,0.5");
    }
}
