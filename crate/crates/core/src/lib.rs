//! Temporal waypoint dropping for multi-agent trajectory forecasting.
//!
//! Waypoint dropping removes the same timestamp from every agent's observed
//! trajectory (and front-pads to keep the window length), either stochastically
//! during training or at a fixed index at test time. This crate bundles the
//! augmentation with everything needed to measure it: scene types, a seedable
//! RNG, ADE/FDE metrics, baselines and a small trainable forecaster, data
//! ingestion, a synthetic scene generator and an experiment harness.

pub mod augment;
pub mod config;
pub mod data_io;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod predictors;
pub mod rng;
pub mod synthetic;
pub mod types;

pub use augment::{
    apply_fixed_drop, drop_index, pad_front, select_fixed_k, twd, twd_multi, twd_single, DropConfig, DropRecord,
    FixedKSelection, KObjective, KScore,
};
pub use config::Config;
pub use error::{CoreError, Result};
pub use metrics::{ade, dataset_metrics, fde, rd_percent, EvalSpec, Metric, MetricsReport, MinMode};
pub use predictors::{Forecaster, Hyper, Network, Predictor, PredictorKind, TrainConfig, TrainTrace, TwdMode};
pub use rng::RandomSource;
pub use types::{
    scene_dimensions, validate_scene, AgentId, Dataset, FutureWindow, ObservedWindow, PredictionSet, Scene, Split,
    Tracks, Violation, Waypoint,
};
