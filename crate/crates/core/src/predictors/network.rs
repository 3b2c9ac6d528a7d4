//! One-hidden-layer multi-head displacement network with analytic gradients.
//!
//! Each agent is predicted independently. The input is the `n - 1` observed
//! displacement vectors, so the network is translation-equivariant by
//! construction. Hidden layer: `tanh(W1 x + b1)`. Each of the `K` heads emits
//! `m` displacement vectors (`W2 z + b2`), which are cumulatively summed onto
//! the last observed position.
//!
//! Parameter layout in the flat vector: `W1 (hidden x inputs)`, `b1`,
//! `W2 (outputs x hidden)`, `b2`, all row-major.

use serde::{Deserialize, Serialize};

use super::Forecaster;
use crate::error::{CoreError, Result};
use crate::rng::RandomSource;
use crate::types::{FutureWindow, ObservedWindow, PredictionSet, Scene, Tracks, Waypoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyper {
    pub n: usize,
    pub m: usize,
    pub hidden: usize,
    pub heads: usize,
}

impl Hyper {
    pub fn new(n: usize, m: usize, hidden: usize, heads: usize) -> Result<Self> {
        let h = Hyper { n, m, hidden, heads };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<()> {
        if self.n < 2 || self.m == 0 || self.hidden == 0 || self.heads == 0 {
            return Err(CoreError::invalid(format!(
                "network needs n >= 2 and m, hidden, heads >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        2 * (self.n - 1)
    }

    pub fn outputs(&self) -> usize {
        2 * self.m * self.heads
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs() + self.hidden + self.outputs() * self.hidden + self.outputs()
    }

    fn b1(&self) -> usize {
        self.hidden * self.inputs()
    }

    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }

    fn b2(&self) -> usize {
        self.w2() + self.outputs() * self.hidden
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    hyper: Hyper,
    theta: Vec<f64>,
}

/// Batch-mean variety loss and its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradient {
    pub loss: f64,
    pub gradient: Vec<f64>,
}

impl Network {
    pub fn zeros(hyper: Hyper) -> Result<Self> {
        hyper.check()?;
        Ok(Network {
            hyper,
            theta: vec![0.0; hyper.param_count()],
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(hyper: Hyper, src: &mut RandomSource) -> Result<Self> {
        let mut net = Network::zeros(hyper)?;
        let r1 = 1.0 / (hyper.inputs() as f64).sqrt();
        for w in &mut net.theta[..hyper.b1()] {
            *w = src.uniform_real(-r1, r1)?;
        }
        let r2 = 1.0 / (hyper.hidden as f64).sqrt();
        for w in &mut net.theta[hyper.w2()..hyper.b2()] {
            *w = src.uniform_real(-r2, r2)?;
        }
        Ok(net)
    }

    pub fn from_theta(hyper: Hyper, theta: Vec<f64>) -> Result<Self> {
        hyper.check()?;
        if theta.len() != hyper.param_count() {
            return Err(CoreError::shape(format!(
                "expected {} parameters, got {}",
                hyper.param_count(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("non-finite network parameter"));
        }
        Ok(Network { hyper, theta })
    }

    pub fn hyper(&self) -> Hyper {
        self.hyper
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn features(seq: &[Waypoint], x: &mut [f64]) {
        for (i, w) in seq.windows(2).enumerate() {
            let d = w[1] - w[0];
            x[2 * i] = d.x;
            x[2 * i + 1] = d.y;
        }
    }

    fn hidden_layer(&self, x: &[f64], z: &mut [f64]) {
        let hp = &self.hyper;
        let inp = hp.inputs();
        let w1 = &self.theta[..hp.b1()];
        let b1 = &self.theta[hp.b1()..hp.w2()];
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &w1[i * inp..(i + 1) * inp];
            let pre: f64 = b1[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *zi = pre.tanh();
        }
    }

    fn output_layer(&self, z: &[f64], o: &mut [f64]) {
        let hp = &self.hyper;
        let h = hp.hidden;
        let w2 = &self.theta[hp.w2()..hp.b2()];
        let b2 = &self.theta[hp.b2()..];
        for (j, oj) in o.iter_mut().enumerate() {
            let row = &w2[j * h..(j + 1) * h];
            *oj = b2[j] + row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn check_window(&self, observed: &ObservedWindow) -> Result<()> {
        if observed.len() != self.hyper.n {
            return Err(CoreError::shape(format!(
                "network expects {} observed steps, got {}",
                self.hyper.n,
                observed.len()
            )));
        }
        Ok(())
    }

    /// One prediction sample per head.
    pub fn forward(&self, observed: &ObservedWindow) -> Result<PredictionSet> {
        self.check_window(observed)?;
        let hp = self.hyper;
        let mut x = vec![0.0; hp.inputs()];
        let mut z = vec![0.0; hp.hidden];
        let mut o = vec![0.0; hp.outputs()];
        let mut per_head: Vec<Vec<Waypoint>> = vec![Vec::with_capacity(observed.agents() * hp.m); hp.heads];
        for seq in observed.iter_agents() {
            Self::features(seq, &mut x);
            self.hidden_layer(&x, &mut z);
            self.output_layer(&z, &mut o);
            let last = seq[seq.len() - 1];
            for (head, out) in per_head.iter_mut().enumerate() {
                let block = &o[head * 2 * hp.m..(head + 1) * 2 * hp.m];
                let mut pos = last;
                for d in block.chunks_exact(2) {
                    pos = pos + Waypoint::new(d[0], d[1]);
                    out.push(pos);
                }
            }
        }
        let samples = per_head
            .into_iter()
            .map(|pts| Tracks::from_flat(observed.agents(), hp.m, pts).map(FutureWindow::new))
            .collect::<Result<Vec<_>>>()?;
        PredictionSet::new(samples)
    }

    /// Batch-mean variety loss computed through [`forward`](Self::forward).
    pub fn batch_loss(&self, scenes: &[Scene]) -> Result<f64> {
        if scenes.is_empty() {
            return Err(CoreError::EmptyDataset);
        }
        let mut total = 0.0;
        for s in scenes {
            total += variety_loss(&self.forward(s.observed())?, s.future())?.0;
        }
        Ok(total / scenes.len() as f64)
    }

    /// Exact gradient of the batch-mean variety loss.
    pub fn backward(&self, scenes: &[Scene]) -> Result<BatchGradient> {
        if scenes.is_empty() {
            return Err(CoreError::EmptyDataset);
        }
        let hp = self.hyper;
        let (inp, h, out, m) = (hp.inputs(), hp.hidden, hp.outputs(), hp.m);
        let batch_scale = 1.0 / scenes.len() as f64;

        let mut grad = vec![0.0; hp.param_count()];
        let mut total = 0.0;
        let mut g_pos = vec![Waypoint::ORIGIN; m];
        let mut g_z = vec![0.0; h];

        for scene in scenes {
            let obs = scene.observed();
            self.check_window(obs)?;
            let gt = scene.future();
            if gt.len() != m || gt.agents() != obs.agents() {
                return Err(CoreError::shape("future window does not match network horizon"));
            }
            let agents = obs.agents();
            let mut xs = vec![0.0; agents * inp];
            let mut zs = vec![0.0; agents * h];
            let mut os = vec![0.0; agents * out];
            for (a, seq) in obs.iter_agents().enumerate() {
                Self::features(seq, &mut xs[a * inp..(a + 1) * inp]);
                let (x, z) = (&xs[a * inp..(a + 1) * inp], &mut zs[a * h..(a + 1) * h]);
                self.hidden_layer(x, z);
                self.output_layer(&zs[a * h..(a + 1) * h], &mut os[a * out..(a + 1) * out]);
            }

            let norm = 1.0 / (agents * m) as f64;
            let head_sse = |head: usize| -> f64 {
                let mut sse = 0.0;
                for (a, seq) in obs.iter_agents().enumerate() {
                    let block = &os[a * out + head * 2 * m..a * out + (head + 1) * 2 * m];
                    let mut pos = seq[seq.len() - 1];
                    for (d, g) in block.chunks_exact(2).zip(gt.agent(a)) {
                        pos = pos + Waypoint::new(d[0], d[1]);
                        sse += (pos - *g).norm_sq();
                    }
                }
                sse
            };
            let mut best = 0;
            let mut best_sse = head_sse(0);
            for head in 1..hp.heads {
                let sse = head_sse(head);
                if sse < best_sse {
                    best = head;
                    best_sse = sse;
                }
            }
            total += best_sse * norm;

            let coef = 2.0 * norm * batch_scale;
            for (a, seq) in obs.iter_agents().enumerate() {
                let block = &os[a * out + best * 2 * m..a * out + (best + 1) * 2 * m];
                let mut pos = seq[seq.len() - 1];
                for (t, (d, g)) in block.chunks_exact(2).zip(gt.agent(a)).enumerate() {
                    pos = pos + Waypoint::new(d[0], d[1]);
                    g_pos[t] = (pos - *g) * coef;
                }
                // Position t depends on displacements 0..=t: reverse cumulative sum.
                for t in (0..m.saturating_sub(1)).rev() {
                    g_pos[t] = g_pos[t] + g_pos[t + 1];
                }

                let z = &zs[a * h..(a + 1) * h];
                let x = &xs[a * inp..(a + 1) * inp];
                g_z.iter_mut().for_each(|v| *v = 0.0);
                for (t, gd) in g_pos.iter().enumerate() {
                    for (c, gv) in [gd.x, gd.y].into_iter().enumerate() {
                        let j = best * 2 * m + 2 * t + c;
                        grad[hp.b2() + j] += gv;
                        let w_row = hp.w2() + j * h;
                        for i in 0..h {
                            grad[w_row + i] += gv * z[i];
                            g_z[i] += gv * self.theta[w_row + i];
                        }
                    }
                }
                for i in 0..h {
                    let g_pre = g_z[i] * (1.0 - z[i] * z[i]);
                    grad[hp.b1() + i] += g_pre;
                    let row = i * inp;
                    for (q, xv) in x.iter().enumerate() {
                        grad[row + q] += g_pre * xv;
                    }
                }
            }
        }
        Ok(BatchGradient {
            loss: total * batch_scale,
            gradient: grad,
        })
    }
}

impl Forecaster for Network {
    fn forecast(&self, observed: &ObservedWindow, horizon: usize) -> Result<PredictionSet> {
        if horizon != self.hyper.m {
            return Err(CoreError::shape(format!(
                "network predicts {} steps, asked for {horizon}",
                self.hyper.m
            )));
        }
        self.forward(observed)
    }
}

/// Minimum over samples of the mean squared Euclidean error, and the
/// 0-based index of the sample attaining it (first on ties).
pub fn variety_loss(predset: &PredictionSet, gt: &Tracks) -> Result<(f64, usize)> {
    let mut best = (f64::INFINITY, 0);
    for (i, s) in predset.samples().iter().enumerate() {
        if s.agents() != gt.agents() || s.len() != gt.len() {
            return Err(CoreError::shape("prediction and ground truth differ in shape"));
        }
        let mse = s
            .points()
            .iter()
            .zip(gt.points())
            .map(|(p, g)| (*p - *g).norm_sq())
            .sum::<f64>()
            / gt.points().len() as f64;
        if mse < best.0 {
            best = (mse, i);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(seqs: &[&[(f64, f64)]]) -> ObservedWindow {
        ObservedWindow::anonymous(Tracks::from_xy(seqs).unwrap())
    }

    #[test]
    fn parameter_count_closed_form() {
        let hp = Hyper::new(8, 12, 64, 20).unwrap();
        // 64*14 + 64 + 480*64 + 480
        assert_eq!(hp.param_count(), 896 + 64 + 30720 + 480);
        let net = Network::zeros(hp).unwrap();
        assert_eq!(net.theta().len(), hp.param_count());
    }

    #[test]
    fn zero_parameters_repeat_last_position() {
        let net = Network::zeros(Hyper::new(3, 4, 5, 2).unwrap()).unwrap();
        let out = net.forward(&obs(&[&[(0.0, 0.0), (1.0, 2.0), (3.0, 5.0)]])).unwrap();
        assert_eq!(out.k(), 2);
        for s in out.samples() {
            assert!(s.points().iter().all(|p| *p == Waypoint::new(3.0, 5.0)));
            assert_eq!(s.len(), 4);
        }
    }

    #[test]
    fn translation_equivariance_is_exact() {
        let hp = Hyper::new(4, 3, 6, 2).unwrap();
        let net = Network::init(hp, &mut RandomSource::new(1)).unwrap();
        let o = obs(&[&[(0.0, 0.0), (1.0, 0.5), (2.0, 1.5), (2.5, 3.0)]]);
        let shift = Waypoint::new(100.0, -50.0);
        let shifted = ObservedWindow::anonymous(o.translated(shift));
        let a = net.forward(&o).unwrap();
        let b = net.forward(&shifted).unwrap();
        for (sa, sb) in a.samples().iter().zip(b.samples()) {
            for (p, q) in sa.points().iter().zip(sb.points()) {
                assert!((*p + shift).distance(q) < 1e-12);
            }
        }
    }

    #[test]
    fn golden_forward_tiny() {
        // n=2 (inputs: one displacement), hidden=1, heads=1, m=2.
        // theta = [W1: 0.5, -0.25 | b1: 0.1 | W2: 0.2, -0.4, 0.6, 0.8 | b2: 0.01, 0.02, 0.03, 0.04]
        let hp = Hyper::new(2, 2, 1, 1).unwrap();
        let theta = vec![0.5, -0.25, 0.1, 0.2, -0.4, 0.6, 0.8, 0.01, 0.02, 0.03, 0.04];
        let net = Network::from_theta(hp, theta).unwrap();
        let out = net.forward(&obs(&[&[(1.0, 1.0), (3.0, 2.0)]])).unwrap();
        // x = (2, 1); pre = 0.5*2 - 0.25*1 + 0.1 = 0.85; z = tanh(0.85)
        let z = 0.85f64.tanh();
        let d1 = (0.2 * z + 0.01, -0.4 * z + 0.02);
        let d2 = (0.6 * z + 0.03, 0.8 * z + 0.04);
        let p1 = (3.0 + d1.0, 2.0 + d1.1);
        let p2 = (p1.0 + d2.0, p1.1 + d2.1);
        let got = out.samples()[0].agent(0);
        assert!((got[0].x - p1.0).abs() < 1e-12 && (got[0].y - p1.1).abs() < 1e-12);
        assert!((got[1].x - p2.0).abs() < 1e-12 && (got[1].y - p2.1).abs() < 1e-12);
    }

    #[test]
    fn variety_loss_cases() {
        let gt = Tracks::from_xy(&[&[(0.0, 0.0), (1.0, 0.0)]]).unwrap();
        let shifted = |d: f64| FutureWindow::new(gt.translated(Waypoint::new(d, 0.0)));

        let perfect = PredictionSet::new(vec![shifted(1.0), shifted(0.0)]).unwrap();
        assert_eq!(variety_loss(&perfect, &gt).unwrap(), (0.0, 1));

        let single = PredictionSet::single(shifted(0.5));
        assert_eq!(variety_loss(&single, &gt).unwrap().0, 0.25);

        // MSEs 0.3 and 0.1 via offsets sqrt(0.3), sqrt(0.1).
        let two = PredictionSet::new(vec![shifted(0.3f64.sqrt()), shifted(0.1f64.sqrt())]).unwrap();
        let (loss, best) = variety_loss(&two, &gt).unwrap();
        assert!((loss - 0.1).abs() < 1e-15);
        assert_eq!(best, 1);
    }

    #[test]
    fn wrong_window_length_rejected() {
        let net = Network::zeros(Hyper::new(3, 2, 2, 1).unwrap()).unwrap();
        assert!(net.forward(&obs(&[&[(0.0, 0.0), (1.0, 0.0)]])).is_err());
        assert!(net.forecast(&obs(&[&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]]), 3).is_err());
    }

    #[test]
    fn bad_theta_rejected() {
        let hp = Hyper::new(2, 1, 1, 1).unwrap();
        assert!(Network::from_theta(hp, vec![0.0; 3]).is_err());
        let mut t = vec![0.0; hp.param_count()];
        t[0] = f64::NAN;
        assert!(Network::from_theta(hp, t).is_err());
    }
}
