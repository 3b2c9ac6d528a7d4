use crate::error::{CoreError, Result};
use crate::types::{FutureWindow, ObservedWindow, PredictionSet, Waypoint};

fn require_two(observed: &ObservedWindow, horizon: usize) -> Result<()> {
    if observed.len() < 2 {
        return Err(CoreError::invalid("baseline needs at least two observed waypoints"));
    }
    if horizon == 0 {
        return Err(CoreError::invalid("horizon must be at least 1"));
    }
    Ok(())
}

/// Continues each agent with its last observed per-step displacement.
pub fn predict_constant_velocity(observed: &ObservedWindow, horizon: usize) -> Result<PredictionSet> {
    require_two(observed, horizon)?;
    let tracks = observed.map_agents(|seq| {
        let last = seq[seq.len() - 1];
        let v = last - seq[seq.len() - 2];
        (1..=horizon).map(|t| last + v * t as f64).collect()
    })?;
    Ok(PredictionSet::single(FutureWindow::new(tracks)))
}

/// Least-squares line per coordinate over timestamps `1..=n`, extrapolated.
pub fn predict_linear_fit(observed: &ObservedWindow, horizon: usize) -> Result<PredictionSet> {
    require_two(observed, horizon)?;
    let n = observed.len();
    let t_mean = (n as f64 + 1.0) / 2.0;
    let stt: f64 = (1..=n).map(|t| (t as f64 - t_mean).powi(2)).sum();
    let tracks = observed.map_agents(|seq| {
        let mean = seq.iter().fold(Waypoint::ORIGIN, |acc, p| acc + *p) * (1.0 / n as f64);
        let slope = seq.iter().enumerate().fold(Waypoint::ORIGIN, |acc, (i, p)| {
            acc + (*p - mean) * (i as f64 + 1.0 - t_mean)
        }) * (1.0 / stt);
        (n + 1..=n + horizon)
            .map(|t| mean + slope * (t as f64 - t_mean))
            .collect()
    })?;
    Ok(PredictionSet::single(FutureWindow::new(tracks)))
}
