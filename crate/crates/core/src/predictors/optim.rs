use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn adam() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn check(&self) -> Result<()> {
        if let OptimizerConfig::Adam { beta1, beta2, eps } = *self {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps.is_nan() || eps <= 0.0 {
                return Err(CoreError::invalid(format!(
                    "adam needs betas in [0, 1) and eps > 0, got ({beta1}, {beta2}, {eps})"
                )));
            }
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adam()
    }
}

/// Optimizer with its running state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    learning_rate: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, learning_rate: f64, params: usize) -> Result<Self> {
        config.check()?;
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(CoreError::invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let state = match config {
            OptimizerConfig::Sgd => 0,
            OptimizerConfig::Adam { .. } => params,
        };
        Ok(Optimizer {
            config,
            learning_rate,
            step: 0,
            m: vec![0.0; state],
            v: vec![0.0; state],
        })
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.step += 1;
        match self.config {
            OptimizerConfig::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}
