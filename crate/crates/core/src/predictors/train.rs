use serde::{Deserialize, Serialize};

use super::network::Network;
use super::optim::{Optimizer, OptimizerConfig};
use crate::augment::{twd, DropConfig};
use crate::error::{CoreError, Result};
use crate::rng::RandomSource;
use crate::types::{Dataset, Scene};

/// How waypoint dropping is used.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwdMode {
    #[default]
    Off,
    Stochastic,
    Fixed,
}

impl TwdMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TwdMode::Off => "off",
            TwdMode::Stochastic => "stochastic",
            TwdMode::Fixed => "fixed",
        }
    }
}

impl std::str::FromStr for TwdMode {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(TwdMode::Off),
            "stochastic" => Ok(TwdMode::Stochastic),
            "fixed" => Ok(TwdMode::Fixed),
            other => Err(CoreError::invalid(format!(
                "unknown twd mode `{other}` (expected off, stochastic or fixed)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub twd_mode: TwdMode,
    pub drop: DropConfig,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch_size: 32,
            learning_rate: 1e-3,
            twd_mode: TwdMode::Off,
            drop: DropConfig::single(),
            seed: 0,
            optimizer: OptimizerConfig::adam(),
        }
    }
}

impl TrainConfig {
    /// Checks the configuration against the observed length `n`.
    pub fn check(&self, n: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(CoreError::invalid("iterations must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(CoreError::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CoreError::invalid("learning rate must be positive"));
        }
        self.optimizer.check()?;
        match self.twd_mode {
            TwdMode::Off => Ok(()),
            TwdMode::Stochastic => self.drop.check(n),
            TwdMode::Fixed => Err(CoreError::invalid(
                "training supports twd mode off or stochastic; fixed drops are a test-time tool",
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    /// Batch loss before each update.
    pub losses: Vec<f64>,
    /// Mean variety loss on the clean validation set after training.
    pub validation_loss: Option<f64>,
    pub network: Network,
}

impl TrainTrace {
    /// Mean loss over the last `window` iterations.
    pub fn tail_mean(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.losses.len());
        self.losses[self.losses.len() - w..].iter().sum::<f64>() / w as f64
    }

    /// `iteration,loss` lines with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, l));
        }
        out
    }
}

/// Minibatch training of the variety loss.
///
/// Scenes are visited in seeded shuffled epochs. With stochastic dropping each
/// scene in each batch is passed through a fresh drop (padded back to `n`)
/// before the forward pass.
pub fn train(
    network: Network,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    let hp = network.hyper();
    cfg.check(hp.n)?;
    for ds in std::iter::once(train_set).chain(val_set) {
        if ds.n_obs() != hp.n || ds.m_pred() != hp.m {
            return Err(CoreError::shape(format!(
                "dataset is (n={}, m={}) but network is (n={}, m={})",
                ds.n_obs(),
                ds.m_pred(),
                hp.n,
                hp.m
            )));
        }
    }

    let root = RandomSource::new(cfg.seed);
    let mut order_src = root.fork("batch-order");
    let mut drop_src = root.fork("twd");
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, hp.param_count())?;
    let mut network = network;

    let scenes = train_set.scenes();
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut batch: Vec<Scene> = Vec::with_capacity(cfg.batch_size);

    for iteration in 1..=cfg.iterations {
        batch.clear();
        while batch.len() < cfg.batch_size {
            if cursor == order.len() {
                order_src.shuffle(&mut order);
                cursor = 0;
            }
            let scene = &scenes[order[cursor]];
            cursor += 1;
            let scene = match cfg.twd_mode {
                TwdMode::Stochastic => twd(scene, &mut drop_src, cfg.drop)?.0,
                _ => scene.clone(),
            };
            debug_assert_eq!(scene.observed().len(), hp.n);
            batch.push(scene);
        }

        let step = network.backward(&batch)?;
        if !step.loss.is_finite() || step.gradient.iter().any(|g| !g.is_finite()) {
            return Err(CoreError::TrainingDiverged {
                iteration,
                loss: step.loss,
            });
        }
        losses.push(step.loss);
        optimizer.apply(network.theta_mut(), &step.gradient);
    }

    let validation_loss = match val_set {
        Some(v) => Some(network.batch_loss(v.scenes())?),
        None => None,
    };
    Ok(TrainTrace {
        losses,
        validation_loss,
        network,
    })
}
