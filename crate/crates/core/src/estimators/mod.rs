//! Probability estimators and proposal-adaptation algorithms.
//!
//! Every adaptive method follows the same outer loop: draw a batch of
//! trajectories from the current mixture of proposals, weight them against
//! the nominal distribution, append them to the estimation dataset, move the
//! intermediate threshold `γ_k` toward the target `γ`, and update each mixture
//! member on the samples assigned to it. The final estimate is the importance
//! sampling mean over all accumulated samples at the true threshold.

mod adaptive;
mod cem;
mod config;
mod losses;
mod mixture;
mod pg;
mod pretrain;
pub mod quadrature;
mod replay;
mod vb;

pub use adaptive::{run_adaptive, IterationContext, Population};
pub use cem::{cem, cem_update, CemFit, StateIndependent, CEM_STD_FLOOR};
pub use config::{EstimatorConfig, Method, ValueWeighting};
pub use losses::{mse_loss_grad, score_loss_grad};
pub use mixture::{mis_reassign, sample_batch, weigh_batch, WeightedBatch};
pub use pg::{baseline_update, pg_ais, pg_update, PgMember, UpdateOutcome};
pub use pretrain::{collect_nominal_states, pretrain_constant, pretrain_policy, pretrain_value, NominalStates};
pub use replay::{ReplayBuffer, StoredTrajectory, Transition};
pub use vb::{derived_probs, vb_ais, vb_ais_trained, vb_policy_update, vb_q_update, vb_target, QNet, VbMember, VbProposal, V_FLOOR};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{rollout, stream_rng, AdversarialMdp, NominalProposal, SampleRecord};
use crate::par;

/// Fraction of records whose return exceeds `gamma`.
pub fn mc_estimate(records: &[SampleRecord], gamma: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("Monte Carlo estimate of an empty dataset".into()));
    }
    let hits = records.iter().filter(|r| r.ret > gamma).count();
    Ok(hits as f64 / records.len() as f64)
}

/// `(1/N) Σ w_i 1{R_i > γ}` over every record, using each record's stored weight.
pub fn is_estimate(records: &[SampleRecord], gamma: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("importance sampling estimate of an empty dataset".into()));
    }
    let mut acc = RunningEstimate::default();
    for r in records {
        acc.push(r, gamma);
    }
    Ok(acc.mean())
}

/// Intermediate threshold: the `⌈ρN⌉`-th largest return, capped at `gamma`.
pub fn adaptive_threshold(returns: &[f64], rho: f64, gamma: f64) -> f64 {
    assert!(!returns.is_empty(), "adaptive threshold of an empty batch");
    assert!(rho > 0.0 && rho <= 1.0, "elite fraction must lie in (0, 1]");
    let mut sorted = returns.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((rho * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    gamma.min(sorted[k - 1])
}

/// Streaming mean and standard error of `w·1{R > γ}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningEstimate {
    pub n: usize,
    sum: f64,
    sum_sq: f64,
}

impl RunningEstimate {
    pub fn push(&mut self, r: &SampleRecord, gamma: f64) {
        let v = if r.ret > gamma { r.weight() } else { 0.0 };
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum / self.n as f64
    }

    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.sum / n;
        let var = ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Per-iteration diagnostics of an adaptive run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationDiag {
    pub iteration: usize,
    pub samples_used: usize,
    pub gamma_k: f64,
    pub elite_count: usize,
    pub mu_hat_running: f64,
    pub std_err_running: f64,
}

/// Result of one estimator run.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub mu_hat: f64,
    pub std_err: f64,
    /// The dataset `D`, in sampling order.
    pub records: Vec<SampleRecord>,
    pub iterations: Vec<IterationDiag>,
    /// Average mean action of each trained member along its own final-iteration
    /// rollouts (expected action index for discrete members).
    pub member_mean_actions: Vec<f64>,
    /// Skipped updates and other recoverable conditions.
    pub warnings: Vec<String>,
}

impl Estimate {
    fn from_records(records: Vec<SampleRecord>, gamma: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("estimator produced no samples".into()));
        }
        let mut acc = RunningEstimate::default();
        records.iter().for_each(|r| acc.push(r, gamma));
        Ok(Self {
            mu_hat: acc.mean(),
            std_err: acc.std_err(),
            records,
            iterations: Vec::new(),
            member_mean_actions: Vec::new(),
            warnings: Vec::new(),
        })
    }
}

/// Plain Monte Carlo with `config.n_total` nominal rollouts.
///
/// Rollout `i` uses stream `(seed, i)`, the same stream the adaptive methods
/// use for their `i`-th sample.
pub fn monte_carlo<E: AdversarialMdp>(config: &EstimatorConfig, env: &E) -> Result<Estimate> {
    let records = par::map_indexed(config.n_total, |i| {
        let mut rng = stream_rng(config.seed, i as u64);
        rollout(env, &NominalProposal, 0, &mut rng)
            .map(|t| SampleRecord { ret: t.ret, log_weight: t.log_weight(), proposal_index: 0 })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Estimate::from_records(records, config.gamma)
}

pub(crate) const TAG_INIT: u64 = 1;
pub(crate) const TAG_PRETRAIN_DATA: u64 = 2;
pub(crate) const TAG_PRETRAIN_SHUFFLE: u64 = 3;
pub(crate) const TAG_REPLAY: u64 = 4;
pub(crate) const TAG_VB_ACTIONS: u64 = 5;

/// Runs `method` with `config` on `env`.
pub fn estimate<E: AdversarialMdp>(method: Method, config: &EstimatorConfig, env: &E) -> Result<Estimate> {
    match method {
        Method::Mc => monte_carlo(config, env),
        Method::Cem => cem(config, env),
        Method::Pg => pg_ais(config, env),
        Method::Vb => vb_ais(config, env),
    }
}

/// Mixes two tags into a seed for an independent random stream family.
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
