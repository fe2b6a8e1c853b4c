use super::mixture::{sample_batch, weigh_batch, WeightedBatch};
use super::{adaptive_threshold, EstimatorConfig, Estimate, IterationDiag, RunningEstimate};
use crate::error::Result;
use crate::mdp::{AdversarialMdp, NominalProposal, Proposal, SampleRecord};

/// Per-iteration context handed to member updates.
#[derive(Clone, Copy, Debug)]
pub struct IterationContext {
    pub iteration: usize,
    pub gamma_k: f64,
}

/// A set of trainable proposals driven by the shared adaptive loop.
pub trait Population<E: AdversarialMdp> {
    /// Trained members in mixture order.
    fn members(&self) -> Vec<&dyn Proposal<E>>;

    /// Updates the members on a freshly weighted batch; returns warnings.
    fn update(&mut self, env: &E, batch: &WeightedBatch<E::State>, ctx: IterationContext) -> Result<Vec<String>>;

    /// Mean action of member `m` at `state`.
    fn mean_action(&self, env: &E, m: usize, state: &E::State) -> f64;
}

/// Shared outer loop: sample from the mixture, weight, extend the dataset,
/// raise the intermediate threshold and update the members. The threshold is
/// kept monotone and the last batch is truncated to the exact budget.
pub fn run_adaptive<E: AdversarialMdp, P: Population<E>>(
    config: &EstimatorConfig,
    env: &E,
    population: &mut P,
) -> Result<Estimate> {
    config.validate()?;
    let fixed = usize::from(config.defensive);
    let mut records = Vec::with_capacity(config.n_total);
    let mut running = RunningEstimate::default();
    let mut iterations = Vec::new();
    let mut warnings = Vec::new();
    let mut gamma_k = f64::NEG_INFINITY;
    let mut last_batch = None;

    let mut iteration = 0;
    while records.len() < config.n_total {
        let n = config.n_per_iter.min(config.n_total - records.len());
        let batch = {
            let mut comps: Vec<&dyn Proposal<E>> = Vec::with_capacity(config.components());
            if config.defensive {
                comps.push(&NominalProposal);
            }
            if config.learn {
                comps.extend(population.members());
            } else {
                comps.extend((0..config.mixture_size).map(|_| &NominalProposal as &dyn Proposal<E>));
            }
            let trajs = sample_batch(env, &comps, n, records.len() as u64, config.seed)?;
            weigh_batch(env, &comps, fixed, trajs)?
        };

        let returns: Vec<f64> = batch.trajectories.iter().map(|t| t.ret).collect();
        gamma_k = gamma_k.max(adaptive_threshold(&returns, config.rho, config.gamma)).min(config.gamma);
        let elite_count = returns.iter().filter(|&&r| r > gamma_k).count();

        for (traj, &lw) in batch.trajectories.iter().zip(&batch.log_weights) {
            let record = SampleRecord { ret: traj.ret, log_weight: lw, proposal_index: traj.proposal_index };
            running.push(&record, config.gamma);
            records.push(record);
        }
        iterations.push(IterationDiag {
            iteration,
            samples_used: records.len(),
            gamma_k,
            elite_count,
            mu_hat_running: running.mean(),
            std_err_running: running.std_err(),
        });

        if config.learn && records.len() < config.n_total {
            let w = population.update(env, &batch, IterationContext { iteration, gamma_k })?;
            for msg in &w {
                log::warn!("iteration {iteration}: {msg}");
            }
            warnings.extend(w.into_iter().map(|m| format!("iteration {iteration}: {m}")));
        }
        last_batch = Some(batch);
        iteration += 1;
    }

    let mut estimate = Estimate::from_records(records, config.gamma)?;
    estimate.iterations = iterations;
    estimate.warnings = warnings;
    if let (Some(batch), true) = (last_batch, config.learn) {
        estimate.member_mean_actions = (0..config.mixture_size)
            .map(|m| {
                let mut sum = 0.0;
                let mut count = 0usize;
                for traj in batch.trajectories.iter().filter(|t| t.proposal_index == m + fixed) {
                    for s in &traj.states[..traj.steps()] {
                        sum += population.mean_action(env, m, s);
                        count += 1;
                    }
                }
                if count == 0 { f64::NAN } else { sum / count as f64 }
            })
            .collect();
    }
    Ok(estimate)
}
