use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Hyper, Network};
use super::{Predictor, PredictorKind};
use crate::error::{CoreError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model description. Baselines store `hidden = heads = 0` and an
/// empty `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: PredictorKind,
    pub n: usize,
    pub m: usize,
    pub hidden: usize,
    pub heads: usize,
    pub theta: Vec<f64>,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_predictor(predictor: &Predictor, n: usize, m: usize, seed: u64) -> Self {
        match predictor {
            Predictor::Learned(net) => {
                let hp = net.hyper();
                Checkpoint {
                    format_version: CHECKPOINT_VERSION,
                    kind: PredictorKind::Learned,
                    n: hp.n,
                    m: hp.m,
                    hidden: hp.hidden,
                    heads: hp.heads,
                    theta: net.theta().to_vec(),
                    seed,
                }
            }
            other => Checkpoint {
                format_version: CHECKPOINT_VERSION,
                kind: other.kind(),
                n,
                m,
                hidden: 0,
                heads: 0,
                theta: Vec::new(),
                seed,
            },
        }
    }

    pub fn into_predictor(self) -> Result<Predictor> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(CoreError::Format(format!(
                "checkpoint version {} not supported (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        Ok(match self.kind {
            PredictorKind::ConstantVelocity => Predictor::ConstantVelocity,
            PredictorKind::LinearFit => Predictor::LinearFit,
            PredictorKind::Learned => {
                let hp = Hyper::new(self.n, self.m, self.hidden, self.heads)?;
                Predictor::Learned(Network::from_theta(hp, self.theta)?)
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    #[test]
    fn learned_round_trip_is_bit_exact() {
        let hp = Hyper::new(8, 12, 4, 3).unwrap();
        let net = Network::init(hp, &mut RandomSource::new(10)).unwrap();
        let ck = Checkpoint::from_predictor(&Predictor::Learned(net.clone()), 8, 12, 10);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        match back.into_predictor().unwrap() {
            Predictor::Learned(n2) => {
                for (a, b) in n2.theta().iter().zip(net.theta()) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn field_names() {
        let ck = Checkpoint::from_predictor(&Predictor::ConstantVelocity, 5, 10, 1);
        let v: serde_json::Value = serde_json::from_str(&ck.to_json().unwrap()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            ["format_version", "heads", "hidden", "kind", "m", "n", "seed", "theta"]
        );
        assert_eq!(v["kind"], "constant_velocity");
    }

    #[test]
    fn version_mismatch() {
        let mut ck = Checkpoint::from_predictor(&Predictor::LinearFit, 5, 10, 1);
        ck.format_version = 99;
        assert!(matches!(ck.into_predictor(), Err(CoreError::Format(_))));
    }
}
