//! Adversarial MDP abstraction, trajectories, rollouts and importance weights.
//!
//! An adversarial MDP replaces the agent's actions with the variables that
//! drive the environment's randomness. Each such "action" has a known nominal
//! density `π(a|s)`, transitions are deterministic given the action, and the
//! return is a risk value that is nonzero only at terminal states.
//!
//! Because transitions are deterministic, the density ratio between the
//! nominal and a proposal trajectory distribution only involves the per-step
//! action densities, which every [`Trajectory`] records at rollout time.

use std::borrow::Cow;
use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Random stream used for every rollout.
pub type StreamRng = ChaCha8Rng;

/// Independent random stream for `(seed, stream)`.
///
/// Rollout `i` of an experiment always uses `stream_rng(seed, i)`, so results
/// do not depend on how rollouts are scheduled across threads.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    /// Index into the nominal support.
    Discrete(usize),
    Continuous(SmallVec<[f64; 2]>),
}

impl Action {
    pub fn scalar(x: f64) -> Self {
        Action::Continuous(smallvec::smallvec![x])
    }

    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Discrete(_) => None,
            Action::Continuous(v) => Some(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Discrete { n: usize },
    Continuous { dim: usize },
}

impl ActionKind {
    pub fn dim(&self) -> usize {
        match *self {
            ActionKind::Discrete { n } => n,
            ActionKind::Continuous { dim } => dim,
        }
    }
}

/// Nominal action distribution `π(·|s)` at one state.
#[derive(Clone, Debug, PartialEq)]
pub enum NominalDist {
    Categorical(Vec<f64>),
    /// Independent Gaussian per action dimension.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn gaussian_logpdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - LN_SQRT_2PI
}

/// Inverse-CDF draw from a probability vector using a single uniform.
pub(crate) fn sample_categorical(probs: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` past the cumulative sum; take the last supported action.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl NominalDist {
    pub fn kind(&self) -> ActionKind {
        match self {
            NominalDist::Categorical(p) => ActionKind::Discrete { n: p.len() },
            NominalDist::Gaussian { mean, .. } => ActionKind::Continuous { dim: mean.len() },
        }
    }

    pub fn logprob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (NominalDist::Categorical(p), Action::Discrete(i)) => match p.get(*i) {
                Some(&pi) if pi > 0.0 => Ok(pi.ln()),
                _ => Err(Error::InvalidAction(format!(
                    "action index {i} outside nominal support of size {}",
                    p.len()
                ))),
            },
            (NominalDist::Gaussian { mean, std }, Action::Continuous(a)) if a.len() == mean.len() => {
                Ok(a.iter()
                    .zip(mean.iter().zip(std))
                    .map(|(&x, (&m, &s))| gaussian_logpdf(x, m, s))
                    .sum())
            }
            _ => Err(Error::InvalidAction(format!("{action:?} does not match {:?}", self.kind()))),
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Action {
        match self {
            NominalDist::Categorical(p) => Action::Discrete(sample_categorical(p, rng)),
            NominalDist::Gaussian { mean, std } => Action::Continuous(
                mean.iter()
                    .zip(std)
                    .map(|(&m, &s)| {
                        let xi: f64 = rng.sample(StandardNormal);
                        m + s * xi
                    })
                    .collect(),
            ),
        }
    }
}

/// Episodic environment whose actions control its stochasticity.
///
/// `step` must be a pure function of `(state, action)`, and every episode must
/// reach a terminal state within `horizon()` steps.
pub trait AdversarialMdp: Sync {
    type State: Clone + Debug + Send + Sync;

    fn initial_state(&self) -> Self::State;

    /// Returns the successor state and whether it is terminal.
    fn step(&self, state: &Self::State, action: &Action) -> Result<(Self::State, bool)>;

    fn nominal(&self, state: &Self::State) -> Cow<'_, NominalDist>;

    fn nominal_logprob(&self, state: &Self::State, action: &Action) -> Result<f64> {
        self.nominal(state).logprob(action)
    }

    fn nominal_sample(&self, state: &Self::State, rng: &mut StreamRng) -> Action {
        self.nominal(state).sample(rng)
    }

    /// Risk value `R(τ)` carried by a terminal state.
    fn terminal_return(&self, state: &Self::State) -> f64;

    fn horizon(&self) -> usize;

    fn action_kind(&self) -> ActionKind;

    /// Network input encoding of a state.
    fn features(&self, state: &Self::State) -> Vec<f64>;

    fn feature_dim(&self) -> usize;

    fn is_finite(&self, _state: &Self::State) -> bool {
        true
    }
}

/// State-conditional action distribution used to generate rollouts.
pub trait Proposal<E: AdversarialMdp + ?Sized>: Send + Sync {
    /// `None` means the proposal follows whatever kind the environment uses.
    fn action_kind(&self) -> Option<ActionKind>;

    fn sample(&self, env: &E, state: &E::State, rng: &mut StreamRng) -> Action;

    fn logprob(&self, env: &E, state: &E::State, action: &Action) -> Result<f64>;

    /// Per-step log-densities of a trajectory's actions under this proposal.
    fn trajectory_logps(&self, env: &E, traj: &Trajectory<E::State>) -> Result<Vec<f64>> {
        traj.actions
            .iter()
            .zip(&traj.states)
            .map(|(a, s)| self.logprob(env, s, a))
            .collect()
    }
}

/// The nominal policy `π` viewed as a proposal.
#[derive(Clone, Copy, Debug, Default)]
pub struct NominalProposal;

impl<E: AdversarialMdp + ?Sized> Proposal<E> for NominalProposal {
    fn action_kind(&self) -> Option<ActionKind> {
        None
    }

    fn sample(&self, env: &E, state: &E::State, rng: &mut StreamRng) -> Action {
        env.nominal_sample(state, rng)
    }

    fn logprob(&self, env: &E, state: &E::State, action: &Action) -> Result<f64> {
        env.nominal_logprob(state, action)
    }
}

/// One rolled-out episode `s₀, a₁, s₁, …, a_T, s_T`.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub states: Vec<S>,
    pub actions: Vec<Action>,
    /// `log π(a_t | s_{t-1})` per step.
    pub nominal_logps: Vec<f64>,
    /// `log q(a_t | s_{t-1})` under the proposal that generated the episode.
    pub proposal_logps: Vec<f64>,
    pub proposal_index: usize,
    pub ret: f64,
}

impl<S> Trajectory<S> {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn nominal_log_density(&self) -> f64 {
        self.nominal_logps.iter().sum()
    }

    pub fn proposal_log_density(&self) -> f64 {
        self.proposal_logps.iter().sum()
    }

    /// `log w(τ)`; transition terms cancel, so only action densities appear.
    pub fn log_weight(&self) -> f64 {
        self.nominal_log_density() - self.proposal_log_density()
    }
}

/// Rolls out one episode, drawing every action from `proposal`.
pub fn rollout<E, P>(
    env: &E,
    proposal: &P,
    proposal_index: usize,
    rng: &mut StreamRng,
) -> Result<Trajectory<E::State>>
where
    E: AdversarialMdp + ?Sized,
    P: Proposal<E> + ?Sized,
{
    if let Some(kind) = proposal.action_kind() {
        if kind != env.action_kind() {
            return Err(Error::InvalidArgument(format!(
                "proposal action kind {kind:?} does not match environment {:?}",
                env.action_kind()
            )));
        }
    }
    let horizon = env.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut nominal_logps = Vec::with_capacity(horizon);
    let mut proposal_logps = Vec::with_capacity(horizon);

    let mut state = env.initial_state();
    for step in 0..horizon {
        let action = proposal.sample(env, &state, rng);
        proposal_logps.push(proposal.logprob(env, &state, &action)?);
        nominal_logps.push(env.nominal_logprob(&state, &action)?);
        let (next, terminal) = env.step(&state, &action)?;
        if !env.is_finite(&next) {
            return Err(Error::NumericalFailure { step: step + 1 });
        }
        states.push(std::mem::replace(&mut state, next));
        actions.push(action);
        if terminal {
            break;
        }
    }
    let ret = env.terminal_return(&state);
    states.push(state);
    Ok(Trajectory { states, actions, nominal_logps, proposal_logps, proposal_index, ret })
}

fn checked_exp(log_weight: f64) -> Result<f64> {
    let w = log_weight.exp();
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::WeightOverflow { log_weight })
    }
}

/// `w(τ) = Π π(a_t|s_{t-1}) / Π q(a_t|s_{t-1})`, evaluated in log space.
pub fn importance_weight<S>(traj: &Trajectory<S>) -> Result<f64> {
    checked_exp(traj.log_weight())
}

/// Log of the partial weight of state `s_k`: ratios for steps `1..k-1`.
pub fn partial_log_weight<S>(traj: &Trajectory<S>, k: usize) -> Result<f64> {
    let steps = traj.steps();
    if k == 0 || k > steps + 1 {
        return Err(Error::InvalidArgument(format!(
            "partial weight index {k} outside 1..={}",
            steps + 1
        )));
    }
    let upto = k - 1;
    let nominal: f64 = traj.nominal_logps[..upto].iter().sum();
    let proposal: f64 = traj.proposal_logps[..upto].iter().sum();
    Ok(nominal - proposal)
}

/// Partial importance weight `w(s_k)`; `k` is 1-based and `w(s_1) = 1`.
pub fn partial_weight<S>(traj: &Trajectory<S>, k: usize) -> Result<f64> {
    checked_exp(partial_log_weight(traj, k)?)
}

/// Deterministic-mixture log-weight from a trajectory's nominal log-density
/// and its log-density under each mixture member.
pub fn dm_log_weight(nominal_log_density: f64, member_log_densities: &[f64]) -> Result<f64> {
    if member_log_densities.is_empty() {
        return Err(Error::InvalidArgument("mixture has no members".into()));
    }
    let lse = log_sum_exp(member_log_densities);
    if lse == f64::NEG_INFINITY {
        return Err(Error::InvalidSupport);
    }
    Ok(nominal_log_density - (lse - (member_log_densities.len() as f64).ln()))
}

/// `p(τ) / ((1/M) Σ_m q_m(τ))` with every member re-evaluated on `traj`.
pub fn dm_weight<E>(
    env: &E,
    traj: &Trajectory<E::State>,
    members: &[&dyn Proposal<E>],
) -> Result<f64>
where
    E: AdversarialMdp + ?Sized,
{
    let member_lds = members
        .iter()
        .map(|m| m.trajectory_logps(env, traj).map(|lp| lp.iter().sum::<f64>()))
        .collect::<Result<Vec<f64>>>()?;
    checked_exp(dm_log_weight(traj.nominal_log_density(), &member_lds)?)
}

/// Samples needed for plain Monte Carlo to reach coefficient of variation `eps_rel`.
pub fn required_samples(mu: f64, eps_rel: f64) -> Result<u64> {
    if !(mu > 0.0 && mu < 1.0) || !(eps_rel > 0.0) || !eps_rel.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "required_samples needs 0 < mu < 1 and eps_rel > 0 (got {mu}, {eps_rel})"
        )));
    }
    let n = ((1.0 - mu) / (mu * eps_rel * eps_rel)).ceil();
    Ok(n as u64)
}

/// One entry of the estimation dataset `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub ret: f64,
    pub log_weight: f64,
    pub proposal_index: usize,
}

impl SampleRecord {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainMdp;

    fn two_step(nominal: [f64; 2], proposal: [f64; 2]) -> Trajectory<()> {
        Trajectory {
            states: vec![(), (), ()],
            actions: vec![Action::Discrete(0), Action::Discrete(0)],
            nominal_logps: nominal.iter().map(|p| p.ln()).collect(),
            proposal_logps: proposal.iter().map(|p| p.ln()).collect(),
            proposal_index: 0,
            ret: 0.0,
        }
    }

    #[test]
    fn two_step_weight_is_direct_ratio() {
        let t = two_step([0.5, 0.5], [0.25, 0.8]);
        assert!((importance_weight(&t).unwrap() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn partial_weights() {
        let t = two_step([0.5, 0.5], [0.25, 0.8]);
        assert_eq!(partial_weight(&t, 1).unwrap(), 1.0);
        assert!((partial_weight(&t, 2).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(partial_weight(&t, 3).unwrap(), importance_weight(&t).unwrap());
        assert!(matches!(partial_weight(&t, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(partial_weight(&t, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dm_weight_direct_arithmetic() {
        let lw = dm_log_weight(0.4f64.ln(), &[0.2f64.ln(), 0.6f64.ln()]).unwrap();
        assert!((lw.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dm_weight_all_zero_is_invalid_support() {
        let r = dm_log_weight(0.0, &[f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert!(matches!(r, Err(Error::InvalidSupport)));
    }

    #[test]
    fn weight_overflow_reports_log_weight() {
        let mut t = two_step([0.5, 0.5], [0.5, 0.5]);
        t.proposal_logps = vec![-400.0, -400.0];
        match importance_weight(&t) {
            Err(Error::WeightOverflow { log_weight }) => assert!(log_weight > 700.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn required_samples_values() {
        let n = required_samples(1e-9, 0.1).unwrap() as f64;
        assert!((n / 1e11 - 1.0).abs() < 1e-6);
        assert_eq!(required_samples(0.5, 1.0).unwrap(), 1);
        let n = required_samples(2.53e-5, 0.1).unwrap() as f64;
        assert!((n - 3.952_469e6).abs() < 1e3, "{n}");
        assert!(required_samples(0.0, 0.1).is_err());
        assert!(required_samples(1.0, 0.1).is_err());
        assert!(required_samples(0.1, 0.0).is_err());
    }

    #[test]
    fn nominal_rollout_has_unit_weight() {
        let env = ChainMdp::default();
        for i in 0..50 {
            let mut rng = stream_rng(7, i);
            let t = rollout(&env, &NominalProposal, 0, &mut rng).unwrap();
            assert_eq!(t.nominal_logps, t.proposal_logps);
            assert_eq!(importance_weight(&t).unwrap(), 1.0);
            assert_eq!(t.states.len(), t.actions.len() + 1);
            assert_eq!(t.ret, env.terminal_return(t.states.last().unwrap()));
        }
    }

    #[test]
    fn rollout_is_reproducible() {
        let env = ChainMdp::default();
        let a = rollout(&env, &NominalProposal, 0, &mut stream_rng(3, 11)).unwrap();
        let b = rollout(&env, &NominalProposal, 0, &mut stream_rng(3, 11)).unwrap();
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.proposal_logps, b.proposal_logps);
    }

    #[test]
    fn dm_with_single_member_equals_standard_weight() {
        let env = ChainMdp::default();
        let t = rollout(&env, &NominalProposal, 0, &mut stream_rng(1, 2)).unwrap();
        let members: [&dyn Proposal<ChainMdp>; 1] = [&NominalProposal];
        assert_eq!(dm_weight(&env, &t, &members).unwrap(), importance_weight(&t).unwrap());
    }
}
