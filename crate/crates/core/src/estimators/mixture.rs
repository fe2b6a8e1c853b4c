use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::mdp::{dm_log_weight, rollout, stream_rng, AdversarialMdp, Proposal, Trajectory};
use crate::par;

/// Component that draws the `i`-th of `n` samples when `components` share a
/// batch evenly in contiguous blocks; earlier components absorb the remainder.
pub(crate) fn component_of(i: usize, n: usize, components: usize) -> usize {
    let base = n / components;
    let extra = n % components;
    let big = extra * (base + 1);
    if i < big {
        i / (base + 1)
    } else {
        extra + (i - big) / base
    }
}

/// Rolls out `n` trajectories from the mixture. Sample `i` of the batch uses
/// random stream `(seed, first_index + i)`.
pub fn sample_batch<E: AdversarialMdp>(
    env: &E,
    components: &[&dyn Proposal<E>],
    n: usize,
    first_index: u64,
    seed: u64,
) -> Result<Vec<Trajectory<E::State>>> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("mixture has no components".into()));
    }
    par::map_indexed(n, |i| {
        let c = component_of(i, n, components.len());
        let mut rng = stream_rng(seed, first_index + i as u64);
        rollout(env, components[c], c, &mut rng)
    })
    .into_iter()
    .collect()
}

/// A sampled batch with its mixture densities, weights and member assignment.
#[derive(Clone, Debug)]
pub struct WeightedBatch<S> {
    pub trajectories: Vec<Trajectory<S>>,
    /// `log q_c(a_t | s_{t-1})` per trajectory, component and step.
    pub step_logps: Vec<Vec<Vec<f64>>>,
    /// Importance log-weight of each trajectory (deterministic mixture when
    /// there is more than one component).
    pub log_weights: Vec<f64>,
    /// Trained member each trajectory is assigned to.
    pub assignment: Vec<usize>,
    /// Number of leading components that are not trained members.
    pub fixed_components: usize,
}

impl<S> WeightedBatch<S> {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn components(&self) -> usize {
        self.step_logps.first().map_or(0, Vec::len)
    }

    /// Indices of the trajectories assigned to member `m`.
    pub fn assigned_to(&self, m: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] == m).collect()
    }

    /// Elite coefficients `1{R_i > γ_k} w_i`, scaled by a common positive
    /// factor so the largest is 1. All zero when there are no elites.
    pub fn elite_coefficients(&self, gamma_k: f64) -> Vec<f64> {
        let elite = |i: usize| self.trajectories[i].ret > gamma_k;
        let top = (0..self.len())
            .filter(|&i| elite(i))
            .map(|i| self.log_weights[i])
            .fold(f64::NEG_INFINITY, f64::max);
        (0..self.len())
            .map(|i| if elite(i) { (self.log_weights[i] - top).exp() } else { 0.0 })
            .collect()
    }

    /// Log prefix weights of trajectory `i` under the current mixture:
    /// entry `j` covers actions `1..=j` (entry 0 is 0).
    pub fn prefix_log_weights(&self, i: usize) -> Vec<f64> {
        prefix_log_weights(&self.trajectories[i].nominal_logps, &self.step_logps[i])
    }
}

/// `log w` of each action prefix of one trajectory against the equal-weight
/// mixture with per-step log-densities `component_logps[c][t]`.
pub(crate) fn prefix_log_weights(nominal_logps: &[f64], component_logps: &[Vec<f64>]) -> Vec<f64> {
    let steps = nominal_logps.len();
    let c = component_logps.len();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    let mut nominal = 0.0;
    let mut cum = vec![0.0; c];
    for t in 0..steps {
        nominal += nominal_logps[t];
        for (k, lp) in component_logps.iter().enumerate() {
            cum[k] += lp[t];
        }
        let denom = if c == 1 { cum[0] } else { log_sum_exp(&cum) - (c as f64).ln() };
        out.push(nominal - denom);
    }
    out
}

/// Hard-EM assignment: each row holds one trajectory's log-densities under
/// the members; it goes to the most likely member, lowest index on ties.
pub fn mis_reassign(log_densities: &[Vec<f64>]) -> Vec<usize> {
    log_densities
        .iter()
        .map(|row| {
            let mut best = 0;
            for (m, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// Evaluates every component on every trajectory and forms weights and
/// assignments. The first `fixed_components` components are not trained
/// members and take no part in the assignment.
pub fn weigh_batch<E: AdversarialMdp>(
    env: &E,
    components: &[&dyn Proposal<E>],
    fixed_components: usize,
    trajectories: Vec<Trajectory<E::State>>,
) -> Result<WeightedBatch<E::State>> {
    let c = components.len();
    if fixed_components >= c {
        return Err(Error::InvalidArgument("mixture has no trained members".into()));
    }
    let step_logps = par::map_indexed(trajectories.len(), |i| {
        let traj = &trajectories[i];
        (0..c)
            .map(|k| {
                if k == traj.proposal_index {
                    Ok(traj.proposal_logps.clone())
                } else {
                    components[k].trajectory_logps(env, traj)
                }
            })
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut log_weights = Vec::with_capacity(trajectories.len());
    let mut member_lds = Vec::with_capacity(trajectories.len());
    for (traj, lps) in trajectories.iter().zip(&step_logps) {
        let totals: Vec<f64> = lps.iter().map(|v| v.iter().sum()).collect();
        let lw = if c == 1 { traj.log_weight() } else { dm_log_weight(traj.nominal_log_density(), &totals)? };
        log_weights.push(lw);
        member_lds.push(totals[fixed_components..].to_vec());
    }
    let assignment = mis_reassign(&member_lds);
    Ok(WeightedBatch { trajectories, step_logps, log_weights, assignment, fixed_components })
}
