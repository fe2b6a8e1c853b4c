use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{widths, Mlp};
use crate::error::{Error, Result};
use crate::mdp::{gaussian_logpdf, sample_categorical, Action, ActionKind, AdversarialMdp, Proposal, StreamRng, Trajectory};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Uniform mixing weight that keeps every categorical action probability ≥ floor/|A|.
pub const PROB_FLOOR: f64 = 1e-3;

/// Diagonal Gaussian over actions; the network emits `[mean…, log_std…]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianHead {
    pub net: Mlp,
    dim: usize,
}

impl GaussianHead {
    /// Output bias of the log-std units is set to `ln(init_std)`.
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, dim: usize, init_std: f64, rng: &mut R) -> Self {
        let mut net = Mlp::new(&widths(feature_dim, 2 * dim), rng);
        net.output_bias_mut()[dim..].fill(init_std.ln());
        Self { net, dim }
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        let out = net.output_dim();
        if out == 0 || out % 2 != 0 {
            return Err(Error::InvalidArgument(format!("Gaussian head needs an even output width, got {out}")));
        }
        Ok(Self { dim: out / 2, net })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn log_std(raw: f64) -> f64 {
        raw.clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    /// Mean and standard deviation for one network output row.
    pub fn moments(&self, out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mean = out[..self.dim].to_vec();
        let std = out[self.dim..].iter().map(|&r| Self::log_std(r).exp()).collect();
        (mean, std)
    }

    pub fn logprob(&self, out: &[f64], a: &[f64]) -> f64 {
        (0..self.dim)
            .map(|d| gaussian_logpdf(a[d], out[d], Self::log_std(out[self.dim + d]).exp()))
            .sum()
    }

    /// Log-density and its gradient with respect to the output row.
    pub fn logprob_grad(&self, out: &[f64], a: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; 2 * self.dim];
        let mut lp = 0.0;
        for d in 0..self.dim {
            let raw = out[self.dim + d];
            let ls = Self::log_std(raw);
            let std = ls.exp();
            let z = (a[d] - out[d]) / std;
            lp += -0.5 * z * z - ls - crate::mdp::LN_SQRT_2PI;
            g[d] = z / std;
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                g[self.dim + d] = z * z - 1.0;
            }
        }
        (lp, g)
    }

    pub fn sample(&self, out: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let xi: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        self.rsample(out, &xi)
    }

    /// Reparameterized draw `mean + std·ξ`.
    pub fn rsample(&self, out: &[f64], xi: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|d| out[d] + Self::log_std(out[self.dim + d]).exp() * xi[d]).collect()
    }

    /// Pulls a gradient with respect to a reparameterized action back to the
    /// output row.
    pub fn rsample_pullback(&self, out: &[f64], xi: &[f64], grad_action: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; 2 * self.dim];
        for d in 0..self.dim {
            let raw = out[self.dim + d];
            g[d] = grad_action[d];
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                g[self.dim + d] = grad_action[d] * Self::log_std(raw).exp() * xi[d];
            }
        }
        g
    }
}

/// Softmax over the nominal support mixed with a uniform floor.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalHead {
    pub net: Mlp,
    pub floor: f64,
}

impl CategoricalHead {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, n: usize, rng: &mut R) -> Self {
        Self { net: Mlp::new(&widths(feature_dim, n), rng), floor: PROB_FLOOR }
    }

    pub fn n(&self) -> usize {
        self.net.output_dim()
    }

    fn softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    pub fn probs(&self, logits: &[f64]) -> Vec<f64> {
        let n = logits.len() as f64;
        Self::softmax(logits).into_iter().map(|s| (1.0 - self.floor) * s + self.floor / n).collect()
    }

    pub fn logprob(&self, logits: &[f64], a: usize) -> Result<f64> {
        self.probs(logits)
            .get(a)
            .map(|p| p.ln())
            .ok_or_else(|| Error::InvalidAction(format!("action {a} outside support of size {}", logits.len())))
    }

    pub fn logprob_grad(&self, logits: &[f64], a: usize) -> Result<(f64, Vec<f64>)> {
        let n = logits.len();
        if a >= n {
            return Err(Error::InvalidAction(format!("action {a} outside support of size {n}")));
        }
        let s = Self::softmax(logits);
        let p = (1.0 - self.floor) * s[a] + self.floor / n as f64;
        let scale = (1.0 - self.floor) * s[a] / p;
        let g = (0..n).map(|j| scale * (if j == a { 1.0 } else { 0.0 } - s[j])).collect();
        Ok((p.ln(), g))
    }
}

/// Network-parameterized proposal policy.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyNet {
    Gaussian(GaussianHead),
    Categorical(CategoricalHead),
}

impl PolicyNet {
    /// Fresh policy matching an environment's action space. `init_std` seeds
    /// the Gaussian log-std bias and is ignored for categorical heads.
    pub fn for_kind<R: Rng + ?Sized>(kind: ActionKind, feature_dim: usize, init_std: f64, rng: &mut R) -> Self {
        match kind {
            ActionKind::Discrete { n } => PolicyNet::Categorical(CategoricalHead::new(feature_dim, n, rng)),
            ActionKind::Continuous { dim } => PolicyNet::Gaussian(GaussianHead::new(feature_dim, dim, init_std, rng)),
        }
    }

    pub fn net(&self) -> &Mlp {
        match self {
            PolicyNet::Gaussian(h) => &h.net,
            PolicyNet::Categorical(h) => &h.net,
        }
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        match self {
            PolicyNet::Gaussian(h) => &mut h.net,
            PolicyNet::Categorical(h) => &mut h.net,
        }
    }

    pub fn kind(&self) -> ActionKind {
        match self {
            PolicyNet::Gaussian(h) => ActionKind::Continuous { dim: h.dim() },
            PolicyNet::Categorical(h) => ActionKind::Discrete { n: h.n() },
        }
    }

    pub fn sample_out(&self, out: &[f64], rng: &mut StreamRng) -> Action {
        match self {
            PolicyNet::Gaussian(h) => Action::Continuous(h.sample(out, rng).into()),
            PolicyNet::Categorical(h) => Action::Discrete(sample_categorical(&h.probs(out), rng)),
        }
    }

    pub fn logprob_out(&self, out: &[f64], a: &Action) -> Result<f64> {
        match (self, a) {
            (PolicyNet::Gaussian(h), Action::Continuous(v)) if v.len() == h.dim() => Ok(h.logprob(out, v)),
            (PolicyNet::Categorical(h), Action::Discrete(i)) => h.logprob(out, *i),
            _ => Err(Error::InvalidAction(format!("{a:?} does not match policy {:?}", self.kind()))),
        }
    }

    pub fn logprob_grad_out(&self, out: &[f64], a: &Action) -> Result<(f64, Vec<f64>)> {
        match (self, a) {
            (PolicyNet::Gaussian(h), Action::Continuous(v)) if v.len() == h.dim() => Ok(h.logprob_grad(out, v)),
            (PolicyNet::Categorical(h), Action::Discrete(i)) => h.logprob_grad(out, *i),
            _ => Err(Error::InvalidAction(format!("{a:?} does not match policy {:?}", self.kind()))),
        }
    }

    pub fn logprob_batch(&self, features: ArrayView2<'_, f64>, actions: &[Action]) -> Result<Vec<f64>> {
        let out = self.net().forward_batch(features);
        out.rows()
            .into_iter()
            .zip(actions)
            .map(|(row, a)| self.logprob_out(row.as_slice().unwrap(), a))
            .collect()
    }

    /// `Σ_i c_i log q(a_i|s_i)` and its parameter gradient.
    pub fn weighted_logprob_grad(
        &self,
        features: ArrayView2<'_, f64>,
        actions: &[Action],
        coeffs: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let net = self.net();
        let tape = net.forward_tape(features);
        let mut d_out = Array2::zeros(tape.output.dim());
        let mut total = 0.0;
        for (i, (a, &c)) in actions.iter().zip(coeffs).enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = tape.output.row(i);
            let (lp, g) = self.logprob_grad_out(row.as_slice().unwrap(), a)?;
            total += c * lp;
            for (d, gv) in d_out.row_mut(i).iter_mut().zip(g) {
                *d = c * gv;
            }
        }
        Ok((total, net.backward(&tape, d_out.view())))
    }

    /// Mean of the action distribution (expected index for categorical heads).
    pub fn mean_action(&self, out: &[f64]) -> f64 {
        match self {
            PolicyNet::Gaussian(_) => out[0],
            PolicyNet::Categorical(h) => h.probs(out).iter().enumerate().map(|(i, p)| i as f64 * p).sum(),
        }
    }
}

impl<E: AdversarialMdp + ?Sized> Proposal<E> for PolicyNet {
    fn action_kind(&self) -> Option<ActionKind> {
        Some(self.kind())
    }

    fn sample(&self, env: &E, state: &E::State, rng: &mut StreamRng) -> Action {
        let out = self.net().forward(&env.features(state));
        self.sample_out(&out, rng)
    }

    fn logprob(&self, env: &E, state: &E::State, action: &Action) -> Result<f64> {
        let out = self.net().forward(&env.features(state));
        self.logprob_out(&out, action)
    }

    fn trajectory_logps(&self, env: &E, traj: &Trajectory<E::State>) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = traj.states[..traj.steps()].iter().map(|s| env.features(s)).collect();
        self.logprob_batch(super::features_matrix(&rows).view(), &traj.actions)
    }
}
