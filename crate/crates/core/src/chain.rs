//! Tiny enumerable chain MDP with exact oracle tables.
//!
//! Each step draws an action index from a fixed nominal distribution and adds
//! it to an accumulator; the episode fails when the accumulator reaches a
//! threshold. With five steps and three actions the 243 trajectories can be
//! enumerated, which gives exact values of `μ`, `Q^π`, `V^π` and the
//! zero-variance proposal `q*(a|s) = Q(s,a)π(a|s)/V(s)`.

use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mdp::{sample_categorical, Action, ActionKind, AdversarialMdp, NominalDist, Proposal, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChainState {
    pub t: usize,
    pub acc: i64,
}

#[derive(Clone, Debug)]
pub struct ChainMdp {
    pub horizon: usize,
    nominal: NominalDist,
    pub threshold: i64,
}

/// Largest trajectory count the oracle will enumerate.
pub const MAX_ENUMERATION: u128 = 1_000_000;

impl Default for ChainMdp {
    fn default() -> Self {
        Self::new(5, vec![0.8, 0.15, 0.05], 6)
    }
}

impl ChainMdp {
    pub fn new(horizon: usize, probs: Vec<f64>, threshold: i64) -> Self {
        assert!(horizon > 0, "horizon must be positive");
        assert!(probs.iter().all(|&p| p > 0.0), "nominal probabilities must be positive");
        Self { horizon, nominal: NominalDist::Categorical(probs), threshold }
    }

    pub fn probs(&self) -> &[f64] {
        match &self.nominal {
            NominalDist::Categorical(p) => p,
            NominalDist::Gaussian { .. } => unreachable!(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.probs().len()
    }

    pub fn trajectory_count(&self) -> u128 {
        (self.n_actions() as u128).saturating_pow(self.horizon as u32)
    }

    fn check_capacity(&self) -> Result<()> {
        let n = self.trajectory_count();
        if n > MAX_ENUMERATION {
            return Err(Error::Capacity(n));
        }
        Ok(())
    }

    fn ret_of(&self, acc: i64) -> f64 {
        if acc >= self.threshold {
            1.0
        } else {
            0.0
        }
    }

    fn max_acc(&self) -> i64 {
        ((self.n_actions() - 1) * self.horizon) as i64
    }

    /// Every state reachable at step `t`.
    pub fn states_at(&self, t: usize) -> impl Iterator<Item = ChainState> {
        let top = ((self.n_actions() - 1) * t) as i64;
        (0..=top).map(move |acc| ChainState { t, acc })
    }
}

impl AdversarialMdp for ChainMdp {
    type State = ChainState;

    fn initial_state(&self) -> ChainState {
        ChainState { t: 0, acc: 0 }
    }

    fn step(&self, s: &ChainState, a: &Action) -> Result<(ChainState, bool)> {
        let i = match a {
            Action::Discrete(i) if *i < self.n_actions() => *i,
            _ => return Err(Error::InvalidAction(format!("{a:?} not a chain action"))),
        };
        let next = ChainState { t: s.t + 1, acc: s.acc + i as i64 };
        Ok((next, next.t >= self.horizon))
    }

    fn nominal(&self, _s: &ChainState) -> Cow<'_, NominalDist> {
        Cow::Borrowed(&self.nominal)
    }

    fn terminal_return(&self, s: &ChainState) -> f64 {
        self.ret_of(s.acc)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn action_kind(&self) -> ActionKind {
        ActionKind::Discrete { n: self.n_actions() }
    }

    fn features(&self, s: &ChainState) -> Vec<f64> {
        vec![s.t as f64 / self.horizon as f64, s.acc as f64 / self.max_acc() as f64]
    }

    fn feature_dim(&self) -> usize {
        2
    }
}

/// Visits every action sequence from `start`, calling `f(probability, final_state)`.
fn enumerate_from(env: &ChainMdp, start: ChainState, f: &mut impl FnMut(f64, ChainState)) {
    fn rec(env: &ChainMdp, s: ChainState, p: f64, f: &mut impl FnMut(f64, ChainState)) {
        if s.t >= env.horizon {
            f(p, s);
            return;
        }
        for (i, &pi) in env.probs().iter().enumerate() {
            rec(env, ChainState { t: s.t + 1, acc: s.acc + i as i64 }, p * pi, f);
        }
    }
    rec(env, start, 1.0, f);
}

/// Exact `μ = Σ_τ p(τ) 1{R(τ) > γ}` by enumerating every trajectory.
pub fn enumerate_mu(env: &ChainMdp, gamma: f64) -> Result<f64> {
    env.check_capacity()?;
    let mut mu = 0.0;
    enumerate_from(env, env.initial_state(), &mut |p, s| {
        if env.ret_of(s.acc) > gamma {
            mu += p;
        }
    });
    Ok(mu)
}

/// `Q^π(s, a)` by enumerating the subtree below `(s, a)`.
pub fn enumerate_q(env: &ChainMdp, gamma: f64, s: ChainState, action: usize) -> Result<f64> {
    env.check_capacity()?;
    if s.t >= env.horizon || action >= env.n_actions() {
        return Err(Error::InvalidArgument(format!("no action {action} at {s:?}")));
    }
    let next = ChainState { t: s.t + 1, acc: s.acc + action as i64 };
    let mut q = 0.0;
    enumerate_from(env, next, &mut |p, end| {
        if env.ret_of(end.acc) > gamma {
            q += p;
        }
    });
    Ok(q)
}

#[derive(Clone, Debug)]
pub struct ExactTables {
    pub mu: f64,
    /// `Q^π(s, ·)` for every non-terminal state.
    pub q_table: BTreeMap<ChainState, Vec<f64>>,
    /// `V^π(s)` for every state, terminal ones included.
    pub v_table: BTreeMap<ChainState, f64>,
    /// `q*(·|s)` for every non-terminal state with `V(s) > 0`.
    pub qstar_table: BTreeMap<ChainState, Vec<f64>>,
    pub probs: Vec<f64>,
}

/// Backward induction of the sparse indicator return.
pub fn exact_q(env: &ChainMdp, gamma: f64) -> Result<ExactTables> {
    env.check_capacity()?;
    let probs = env.probs().to_vec();
    let mut v_table = BTreeMap::new();
    let mut q_table = BTreeMap::new();
    let mut qstar_table = BTreeMap::new();
    for s in env.states_at(env.horizon) {
        v_table.insert(s, if env.ret_of(s.acc) > gamma { 1.0 } else { 0.0 });
    }
    for t in (0..env.horizon).rev() {
        for s in env.states_at(t) {
            let q: Vec<f64> = (0..probs.len())
                .map(|i| v_table[&ChainState { t: t + 1, acc: s.acc + i as i64 }])
                .collect();
            let v: f64 = q.iter().zip(&probs).map(|(q, p)| q * p).sum();
            if v > 0.0 {
                qstar_table.insert(s, q.iter().zip(&probs).map(|(q, p)| q * p / v).collect());
            }
            v_table.insert(s, v);
            q_table.insert(s, q);
        }
    }
    let mu = v_table[&env.initial_state()];
    Ok(ExactTables { mu, q_table, v_table, qstar_table, probs })
}

/// Tabular zero-variance proposal `q*(a|s) = Q(s,a)π(a|s)/V(s)`.
#[derive(Clone, Debug)]
pub struct OptimalProposal {
    table: BTreeMap<ChainState, Vec<f64>>,
}

pub fn optimal_proposal(tables: &ExactTables) -> Result<OptimalProposal> {
    if tables.mu <= 0.0 {
        return Err(Error::UndefinedProposal);
    }
    Ok(OptimalProposal { table: tables.qstar_table.clone() })
}

impl OptimalProposal {
    pub fn probs(&self, s: &ChainState) -> Result<&[f64]> {
        self.table.get(s).map(Vec::as_slice).ok_or(Error::UndefinedProposal)
    }
}

impl Proposal<ChainMdp> for OptimalProposal {
    fn action_kind(&self) -> Option<ActionKind> {
        None
    }

    fn sample(&self, env: &ChainMdp, s: &ChainState, rng: &mut StreamRng) -> Action {
        match self.probs(s) {
            Ok(p) => Action::Discrete(sample_categorical(p, rng)),
            // Only reachable by starting from a state with no failure below it.
            Err(_) => env.nominal_sample(s, rng),
        }
    }

    fn logprob(&self, _env: &ChainMdp, s: &ChainState, a: &Action) -> Result<f64> {
        let p = self.probs(s)?;
        match a {
            Action::Discrete(i) if *i < p.len() => Ok(p[*i].ln()),
            _ => Err(Error::InvalidAction(format!("{a:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{rollout, stream_rng};

    const GAMMA: f64 = 0.5;

    #[test]
    fn chain_has_243_positive_trajectories() {
        let env = ChainMdp::default();
        assert_eq!(env.trajectory_count(), 243);
        let mut count = 0;
        let mut total = 0.0;
        enumerate_from(&env, env.initial_state(), &mut |p, _| {
            assert!(p > 0.0);
            count += 1;
            total += p;
        });
        assert_eq!(count, 243);
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mu_extremes() {
        let env = ChainMdp::default();
        assert!((enumerate_mu(&env, -1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(enumerate_mu(&env, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn default_mu_regression() {
        // Hand count: sum of five draws from {0,1,2} w.p. (0.8, 0.15, 0.05) reaching 6.
        let mu = enumerate_mu(&ChainMdp::default(), GAMMA).unwrap();
        assert!((mu - 2.719_062_5e-3).abs() < 1e-15, "{mu}");
    }

    #[test]
    fn capacity_error() {
        let env = ChainMdp::new(20, vec![0.5, 0.5], 3);
        assert!(matches!(enumerate_mu(&env, GAMMA), Err(Error::Capacity(_))));
    }

    #[test]
    fn backward_induction_matches_enumeration() {
        let env = ChainMdp::default();
        let tables = exact_q(&env, GAMMA).unwrap();
        assert_eq!(tables.mu, tables.v_table[&env.initial_state()]);
        assert!((tables.mu - enumerate_mu(&env, GAMMA).unwrap()).abs() < 1e-15);
        for (s, q) in &tables.q_table {
            for (a, &qa) in q.iter().enumerate() {
                let e = enumerate_q(&env, GAMMA, *s, a).unwrap();
                assert!((qa - e).abs() < 1e-12, "{s:?} {a}: {qa} vs {e}");
            }
            let v: f64 = q.iter().zip(env.probs()).map(|(q, p)| q * p).sum();
            assert!((v - tables.v_table[s]).abs() < 1e-15);
        }
    }

    #[test]
    fn terminal_base_case() {
        let env = ChainMdp::default();
        let tables = exact_q(&env, GAMMA).unwrap();
        // From t=4 with acc=5 every action but 0 fails.
        let q = &tables.q_table[&ChainState { t: 4, acc: 5 }];
        assert_eq!(q, &vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn qstar_rows_normalized_and_point_mass() {
        let env = ChainMdp::default();
        let tables = exact_q(&env, GAMMA).unwrap();
        for row in tables.qstar_table.values() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Only action 2 reaches 6 from acc=4 at the last step.
        let row = &tables.qstar_table[&ChainState { t: 4, acc: 4 }];
        assert_eq!(row, &vec![0.0, 0.0, 1.0]);
        // No failure reachable: undefined.
        let qs = optimal_proposal(&tables).unwrap();
        assert!(matches!(qs.probs(&ChainState { t: 4, acc: 0 }), Err(Error::UndefinedProposal)));
    }

    #[test]
    fn optimal_proposal_is_zero_variance() {
        let env = ChainMdp::default();
        let tables = exact_q(&env, GAMMA).unwrap();
        let qs = optimal_proposal(&tables).unwrap();
        for i in 0..500 {
            let t = rollout(&env, &qs, 0, &mut stream_rng(99, i)).unwrap();
            let est = t.log_weight().exp() * if t.ret > GAMMA { 1.0 } else { 0.0 };
            assert!((est - tables.mu).abs() < 1e-9 * tables.mu.max(1e-300) + 1e-15, "{est}");
        }
    }
}
