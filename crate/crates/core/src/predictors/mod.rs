//! Forecasters: two closed-form baselines and a small trainable network.

mod baselines;
mod checkpoint;
mod network;
mod optim;
mod train;

pub use baselines::{predict_constant_velocity, predict_linear_fit};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use network::{variety_loss, BatchGradient, Hyper, Network};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{train, TrainConfig, TrainTrace, TwdMode};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::{ObservedWindow, PredictionSet};

/// Anything that maps an observed window to sampled futures.
pub trait Forecaster: Sync {
    fn forecast(&self, observed: &ObservedWindow, horizon: usize) -> Result<PredictionSet>;
}

impl<F: Forecaster + ?Sized> Forecaster for &F {
    fn forecast(&self, observed: &ObservedWindow, horizon: usize) -> Result<PredictionSet> {
        (**self).forecast(observed, horizon)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    ConstantVelocity,
    LinearFit,
    Learned,
}

impl PredictorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorKind::ConstantVelocity => "constant_velocity",
            PredictorKind::LinearFit => "linear_fit",
            PredictorKind::Learned => "learned",
        }
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = crate::error::CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant_velocity" | "cv" => Ok(PredictorKind::ConstantVelocity),
            "linear_fit" => Ok(PredictorKind::LinearFit),
            "learned" => Ok(PredictorKind::Learned),
            other => Err(crate::error::CoreError::invalid(format!(
                "unknown predictor kind `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictor {
    ConstantVelocity,
    LinearFit,
    Learned(Network),
}

impl Predictor {
    pub fn kind(&self) -> PredictorKind {
        match self {
            Predictor::ConstantVelocity => PredictorKind::ConstantVelocity,
            Predictor::LinearFit => PredictorKind::LinearFit,
            Predictor::Learned(_) => PredictorKind::Learned,
        }
    }
}

impl Forecaster for Predictor {
    fn forecast(&self, observed: &ObservedWindow, horizon: usize) -> Result<PredictionSet> {
        match self {
            Predictor::ConstantVelocity => predict_constant_velocity(observed, horizon),
            Predictor::LinearFit => predict_linear_fit(observed, horizon),
            Predictor::Learned(net) => net.forecast(observed, horizon),
        }
    }
}
