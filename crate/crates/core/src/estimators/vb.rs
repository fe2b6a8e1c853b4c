use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::adaptive::{run_adaptive, IterationContext, Population};
use super::losses::{all_finite, mse_loss_grad, score_loss_grad};
use super::mixture::{prefix_log_weights, WeightedBatch};
use super::pg::{init_policies, pretrain_data, UpdateOutcome};
use super::pretrain::pretrain_value;
use super::quadrature::GaussHermite;
use super::replay::{ReplayBuffer, StoredTrajectory, Transition};
use super::{derive_seed, EstimatorConfig, Estimate, ValueWeighting, TAG_INIT, TAG_PRETRAIN_SHUFFLE, TAG_REPLAY, TAG_VB_ACTIONS};
use crate::error::{Error, Result};
use crate::mdp::{
    sample_categorical, stream_rng, Action, ActionKind, AdversarialMdp, NominalDist, NominalProposal, Proposal,
    StreamRng, Trajectory,
};
use crate::neural::{features_matrix, widths, Adam, Mlp, PolicyNet};
use crate::par;

/// States whose value estimate falls at or below this are left to the nominal policy.
pub const V_FLOOR: f64 = 1e-12;

/// State-action value network. Discrete networks map features to one value
/// per action; continuous networks map `[features, action]` to one value.
#[derive(Clone, Debug, PartialEq)]
pub struct QNet {
    pub net: Mlp,
    kind: ActionKind,
}

fn q_dims(kind: ActionKind, feature_dim: usize) -> (usize, usize) {
    match kind {
        ActionKind::Discrete { n } => (feature_dim, n),
        ActionKind::Continuous { dim } => (feature_dim + dim, 1),
    }
}

impl QNet {
    pub fn new<R: Rng + ?Sized>(kind: ActionKind, feature_dim: usize, rng: &mut R) -> Self {
        let (i, o) = q_dims(kind, feature_dim);
        Self { net: Mlp::new(&widths(i, o), rng), kind }
    }

    pub fn from_net(net: Mlp, kind: ActionKind) -> Result<Self> {
        let ok = match kind {
            ActionKind::Discrete { n } => net.output_dim() == n,
            ActionKind::Continuous { dim } => net.output_dim() == 1 && net.input_dim() > dim,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("network shape does not fit a {kind:?} value function")));
        }
        Ok(Self { net, kind })
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    /// Network inputs and output column for each (state, action) row.
    pub fn inputs(&self, features: ArrayView2<'_, f64>, actions: &[Action]) -> Result<(Array2<f64>, Vec<usize>)> {
        match self.kind {
            ActionKind::Discrete { n } => {
                let cols = actions
                    .iter()
                    .map(|a| a.as_discrete().filter(|&i| i < n).ok_or_else(|| bad_action(a, self.kind)))
                    .collect::<Result<Vec<_>>>()?;
                Ok((features.to_owned(), cols))
            }
            ActionKind::Continuous { dim } => {
                let fd = features.ncols();
                let mut x = Array2::zeros((features.nrows(), fd + dim));
                for (i, a) in actions.iter().enumerate() {
                    let v = a.as_continuous().filter(|v| v.len() == dim).ok_or_else(|| bad_action(a, self.kind))?;
                    for j in 0..fd {
                        x[[i, j]] = features[[i, j]];
                    }
                    for d in 0..dim {
                        x[[i, fd + d]] = v[d];
                    }
                }
                Ok((x, vec![0; actions.len()]))
            }
        }
    }

    pub fn values(&self, features: ArrayView2<'_, f64>, actions: &[Action]) -> Result<Vec<f64>> {
        let (x, cols) = self.inputs(features, actions)?;
        let out = self.net.forward_batch(x.view());
        Ok(cols.iter().enumerate().map(|(i, &c)| out[[i, c]]).collect())
    }

    /// `E_{a∼π(·|s)} Q(s, a)` per row: exact enumeration for categorical
    /// nominals, Gauss–Hermite quadrature for one-dimensional Gaussians.
    pub fn nominal_expectation(
        &self,
        features: ArrayView2<'_, f64>,
        nominals: &[NominalDist],
        gh: &GaussHermite,
    ) -> Result<Vec<f64>> {
        match self.kind {
            ActionKind::Discrete { n } => {
                let out = self.net.forward_batch(features);
                nominals
                    .iter()
                    .enumerate()
                    .map(|(i, d)| match d {
                        NominalDist::Categorical(p) if p.len() == n => {
                            Ok(p.iter().enumerate().map(|(a, pa)| pa * out[[i, a]]).sum())
                        }
                        _ => Err(Error::InvalidArgument("nominal does not match the value network".into())),
                    })
                    .collect()
            }
            ActionKind::Continuous { dim } => {
                if dim != 1 {
                    return Err(Error::InvalidArgument(format!("quadrature supports one action dimension, got {dim}")));
                }
                let nodes = gh.nodes.len();
                let fd = features.ncols();
                let mut x = Array2::zeros((features.nrows() * nodes, fd + 1));
                let mut probs = Vec::with_capacity(x.nrows());
                for (i, d) in nominals.iter().enumerate() {
                    let NominalDist::Gaussian { mean, std } = d else {
                        return Err(Error::InvalidArgument("nominal does not match the value network".into()));
                    };
                    for (k, (point, p)) in gh.normal_points(mean[0], std[0]).enumerate() {
                        let r = i * nodes + k;
                        for j in 0..fd {
                            x[[r, j]] = features[[i, j]];
                        }
                        x[[r, fd]] = point;
                        probs.push(p);
                    }
                }
                let out = self.net.forward_batch(x.view());
                Ok((0..nominals.len())
                    .map(|i| (0..nodes).map(|k| probs[i * nodes + k] * out[[i * nodes + k, 0]]).sum())
                    .collect())
            }
        }
    }
}

fn bad_action(a: &Action, kind: ActionKind) -> Error {
    Error::InvalidAction(format!("{a:?} does not match value network {kind:?}"))
}

/// `q(a|s) = (1−ε) Q⁺(s,a) π(a|s) / V⁺(s) + ε π(a|s)` with `Q⁺ = max(Q, 0)`
/// and `V⁺ = Σ_a π Q⁺`; the nominal distribution itself when `V⁺ ≤ V_FLOOR`.
pub fn derived_probs(q_row: &[f64], nominal: &[f64], floor: f64) -> Vec<f64> {
    let v: f64 = q_row.iter().zip(nominal).map(|(q, p)| q.max(0.0) * p).sum();
    if !(v > V_FLOOR) {
        return nominal.to_vec();
    }
    q_row
        .iter()
        .zip(nominal)
        .map(|(q, p)| (1.0 - floor) * q.max(0.0) * p / v + floor * p)
        .collect()
}

fn nominal_probs<E: AdversarialMdp + ?Sized>(env: &E, s: &E::State) -> Result<Vec<f64>> {
    match env.nominal(s).as_ref() {
        NominalDist::Categorical(p) => Ok(p.clone()),
        _ => Err(Error::InvalidArgument("value-derived proposals need a discrete nominal distribution".into())),
    }
}

/// Discrete acting proposal read off a value network.
#[derive(Clone, Debug, PartialEq)]
pub struct VbProposal {
    pub q: QNet,
    pub floor: f64,
}

impl VbProposal {
    pub fn probs<E: AdversarialMdp + ?Sized>(&self, env: &E, s: &E::State) -> Result<Vec<f64>> {
        let q_row = self.q.net.forward(&env.features(s));
        Ok(derived_probs(&q_row, &nominal_probs(env, s)?, self.floor))
    }
}

impl<E: AdversarialMdp + ?Sized> Proposal<E> for VbProposal {
    fn action_kind(&self) -> Option<ActionKind> {
        Some(self.q.kind)
    }

    fn sample(&self, env: &E, state: &E::State, rng: &mut StreamRng) -> Action {
        let p = self.probs(env, state).expect("value-derived proposal on a discrete environment");
        Action::Discrete(sample_categorical(&p, rng))
    }

    fn logprob(&self, env: &E, state: &E::State, action: &Action) -> Result<f64> {
        let p = self.probs(env, state)?;
        let i = action.as_discrete().filter(|&i| i < p.len()).ok_or_else(|| bad_action(action, self.q.kind))?;
        Ok(p[i].ln())
    }

    fn trajectory_logps(&self, env: &E, traj: &Trajectory<E::State>) -> Result<Vec<f64>> {
        let states = &traj.states[..traj.steps()];
        let rows: Vec<Vec<f64>> = states.iter().map(|s| env.features(s)).collect();
        let out = self.q.net.forward_batch(features_matrix(&rows).view());
        states
            .iter()
            .zip(&traj.actions)
            .enumerate()
            .map(|(t, (s, a))| {
                let p = derived_probs(out.row(t).as_slice().unwrap(), &nominal_probs(env, s)?, self.floor);
                let i = a.as_discrete().filter(|&i| i < p.len()).ok_or_else(|| bad_action(a, self.q.kind))?;
                Ok(p[i].ln())
            })
            .collect()
    }
}

/// Bootstrap targets: `1{R > γ_k}` at terminal transitions, otherwise the
/// nominal expectation of the frozen network at the next state.
pub fn vb_target<E: AdversarialMdp>(
    env: &E,
    frozen: &QNet,
    transitions: &[Transition<E::State>],
    gamma_k: f64,
    gh: &GaussHermite,
) -> Result<Vec<f64>> {
    let mut y = vec![0.0; transitions.len()];
    let mut open = Vec::new();
    for (i, t) in transitions.iter().enumerate() {
        if t.is_terminal() {
            y[i] = if t.ret() > gamma_k { 1.0 } else { 0.0 };
        } else {
            open.push(i);
        }
    }
    if !open.is_empty() {
        let fd = transitions[open[0]].source.features.ncols();
        let mut x = Array2::zeros((open.len(), fd));
        let mut nominals = Vec::with_capacity(open.len());
        for (r, &i) in open.iter().enumerate() {
            let t = &transitions[i];
            x.row_mut(r).assign(&t.source.features.row(t.step + 1));
            nominals.push(env.nominal(t.next_state()).into_owned());
        }
        for (v, &i) in frozen.nominal_expectation(x.view(), &nominals, gh)?.into_iter().zip(&open) {
            y[i] = v;
        }
    }
    Ok(y)
}

fn transition_features<S>(transitions: &[Transition<S>]) -> Array2<f64> {
    let fd = transitions.first().map_or(0, |t| t.source.features.ncols());
    let mut x = Array2::zeros((transitions.len(), fd));
    for (r, t) in transitions.iter().enumerate() {
        x.row_mut(r).assign(&t.source.features.row(t.step));
    }
    x
}

/// Self-normalized weights `exp(lw − max lw)` and their sum.
fn normalized(log_weights: &[f64]) -> (Vec<f64>, f64) {
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
    let s = w.iter().sum();
    (w, s)
}

/// `epochs` Adam steps on `Σ w_i (Q(s_i,a_i) − y_i)² / Σ w_i`, where
/// `w_i = exp(log_weights[i])` is the partial weight through action `a_i`.
#[allow(clippy::too_many_arguments)]
pub fn vb_q_update(
    q: &mut QNet,
    opt: &mut Adam,
    features: ArrayView2<'_, f64>,
    actions: &[Action],
    targets: &[f64],
    log_weights: &[f64],
    epochs: usize,
) -> Result<UpdateOutcome> {
    let (x, cols) = q.inputs(features, actions)?;
    let (w, total) = normalized(log_weights);
    if !(total > 0.0 && total.is_finite()) {
        return Ok(UpdateOutcome::Skipped("value batch has no usable weight".into()));
    }
    let mut last = f64::NAN;
    for _ in 0..epochs {
        let (loss, g) = mse_loss_grad(&q.net, x.view(), Some(&cols), targets, Some(&w), total)?;
        if !loss.is_finite() || !all_finite(&g) {
            return Ok(UpdateOutcome::Skipped("non-finite value loss".into()));
        }
        opt.step(q.net.params_mut(), &g);
        last = loss;
    }
    Ok(UpdateOutcome::Updated { loss: last })
}

/// Continuous policy step toward `Q π / V`: `k` reparameterized actions per
/// state, each scored by the non-differentiated ratio `Q⁺ π / (q V)`
/// normalized over the state's samples, then `epochs` Adam steps on the
/// weighted negative log-likelihood with state weights `exp(log_weights)`.
#[allow(clippy::too_many_arguments)]
pub fn vb_policy_update<E: AdversarialMdp>(
    env: &E,
    policy: &mut PolicyNet,
    opt: &mut Adam,
    q: &QNet,
    states: &[&E::State],
    features: ArrayView2<'_, f64>,
    log_weights: &[f64],
    k: usize,
    gh: &GaussHermite,
    epochs: usize,
    rng: &mut StreamRng,
) -> Result<UpdateOutcome> {
    let PolicyNet::Gaussian(head) = &*policy else {
        return Err(Error::InvalidArgument("value-based policy updates need a Gaussian policy".into()));
    };
    let nominals: Vec<NominalDist> = states.iter().map(|s| env.nominal(s).into_owned()).collect();
    let v = q.nominal_expectation(features, &nominals, gh)?;
    let out = head.net.forward_batch(features);
    let fd = features.ncols();

    let n = states.len();
    let mut rows = Array2::zeros((n * k, fd));
    let mut actions = Vec::with_capacity(n * k);
    let mut q_logps = Vec::with_capacity(n * k);
    for i in 0..n {
        let o = out.row(i);
        let o = o.as_slice().unwrap();
        for j in 0..k {
            let xi: Vec<f64> = (0..head.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let a = head.rsample(o, &xi);
            q_logps.push(head.logprob(o, &a));
            rows.row_mut(i * k + j).assign(&features.row(i));
            actions.push(Action::Continuous(a.into()));
        }
    }
    let qs = q.values(rows.view(), &actions)?;
    let (sw, _) = normalized(log_weights);

    let mut coeffs = vec![0.0; n * k];
    let mut norm = 0.0;
    for i in 0..n {
        if !(v[i] > V_FLOOR) {
            continue;
        }
        let mut ratios = Vec::with_capacity(k);
        for j in 0..k {
            let r = i * k + j;
            let lp = nominals[i].logprob(&actions[r])?;
            ratios.push(qs[r].max(0.0) * (lp - q_logps[r]).exp() / v[i]);
        }
        let total: f64 = ratios.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            continue;
        }
        for j in 0..k {
            coeffs[i * k + j] = sw[i] * ratios[j] / total;
        }
        norm += sw[i];
    }
    if !(norm > 0.0) {
        return Ok(UpdateOutcome::Skipped("no state with positive value".into()));
    }
    let mut last = f64::NAN;
    for _ in 0..epochs {
        let (loss, g) = score_loss_grad(policy, rows.view(), &actions, &coeffs, norm)?;
        if !loss.is_finite() || !all_finite(&g) {
            return Ok(UpdateOutcome::Skipped("non-finite policy loss".into()));
        }
        opt.step(policy.net_mut().params_mut(), &g);
        last = loss;
    }
    Ok(UpdateOutcome::Updated { loss: last })
}

/// A value network with its frozen copy, plus the acting proposal.
#[derive(Clone, Debug)]
pub enum VbMember {
    /// Discrete actions: the proposal is derived from the value network.
    Derived { proposal: VbProposal, target: QNet, q_opt: Adam, updates: usize },
    /// Continuous actions: a Gaussian policy trained toward the value network.
    Policy { q: QNet, target: QNet, q_opt: Adam, updates: usize, policy: PolicyNet, p_opt: Adam },
}

impl VbMember {
    pub fn q(&self) -> &QNet {
        match self {
            VbMember::Derived { proposal, .. } => &proposal.q,
            VbMember::Policy { q, .. } => q,
        }
    }

    fn acting<E: AdversarialMdp>(&self) -> &dyn Proposal<E> {
        match self {
            VbMember::Derived { proposal, .. } => proposal,
            VbMember::Policy { policy, .. } => policy,
        }
    }

    fn q_step(&mut self, features: ArrayView2<'_, f64>, actions: &[Action], y: &[f64], lw: &[f64], epochs: usize, interval: usize) -> Result<UpdateOutcome> {
        let (q, target, opt, updates) = match self {
            VbMember::Derived { proposal, target, q_opt, updates } => (&mut proposal.q, target, q_opt, updates),
            VbMember::Policy { q, target, q_opt, updates, .. } => (q, target, q_opt, updates),
        };
        let outcome = vb_q_update(q, opt, features, actions, y, lw, epochs)?;
        if matches!(outcome, UpdateOutcome::Updated { .. }) {
            for _ in 0..epochs {
                *updates += 1;
                if *updates % interval == 0 {
                    *target = q.clone();
                }
            }
        }
        Ok(outcome)
    }

    fn target(&self) -> &QNet {
        match self {
            VbMember::Derived { target, .. } | VbMember::Policy { target, .. } => target,
        }
    }
}

struct ReplayGroup<S> {
    members: Vec<usize>,
    transitions: Vec<Transition<S>>,
    /// Log-weight through each transition's action.
    through: Vec<f64>,
    /// Log-weight of each transition's starting state.
    state: Vec<f64>,
}

struct VbPopulation<S> {
    members: Vec<VbMember>,
    buffers: Vec<ReplayBuffer<S>>,
    config: EstimatorConfig,
    gh: GaussHermite,
    replay_rng: StreamRng,
    action_rng: StreamRng,
}

impl<S: Clone + Send + Sync> VbPopulation<S> {
    fn components<'a, E: AdversarialMdp<State = S>>(&'a self) -> Vec<&'a dyn Proposal<E>> {
        let mut comps: Vec<&dyn Proposal<E>> = Vec::new();
        if self.config.defensive {
            comps.push(&NominalProposal);
        }
        comps.extend(self.members.iter().map(|m| m.acting::<E>()));
        comps
    }

    fn weights<E: AdversarialMdp<State = S>>(&self, env: &E, transitions: &[Transition<S>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let prefix: HashMap<*const StoredTrajectory<S>, Vec<f64>> = if self.config.recompute_replay_weights {
            let mut sources: Vec<&Arc<StoredTrajectory<S>>> = Vec::new();
            let mut seen = HashMap::new();
            for t in transitions {
                seen.entry(Arc::as_ptr(&t.source)).or_insert_with(|| {
                    sources.push(&t.source);
                });
            }
            let comps = self.components::<E>();
            let fresh = par::map_indexed(sources.len(), |i| {
                let traj = &sources[i].traj;
                let lps = comps.iter().map(|c| c.trajectory_logps(env, traj)).collect::<Result<Vec<_>>>()?;
                Ok(prefix_log_weights(&traj.nominal_logps, &lps))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            sources.iter().map(|s| Arc::as_ptr(s)).zip(fresh).collect()
        } else {
            HashMap::new()
        };
        let mut through = Vec::with_capacity(transitions.len());
        let mut state = Vec::with_capacity(transitions.len());
        for t in transitions {
            let p = prefix.get(&Arc::as_ptr(&t.source)).unwrap_or(&t.source.frozen_prefix);
            through.push(p[t.step + 1]);
            state.push(p[t.step]);
        }
        Ok((through, state))
    }
}

impl<E: AdversarialMdp> Population<E> for VbPopulation<E::State> {
    fn members(&self) -> Vec<&dyn Proposal<E>> {
        self.members.iter().map(|m| m.acting::<E>()).collect()
    }

    fn update(&mut self, env: &E, batch: &WeightedBatch<E::State>, ctx: IterationContext) -> Result<Vec<String>> {
        for (i, traj) in batch.trajectories.iter().enumerate() {
            let rows: Vec<Vec<f64>> = traj.states.iter().map(|s| env.features(s)).collect();
            let stored = Arc::new(StoredTrajectory {
                traj: traj.clone(),
                features: features_matrix(&rows),
                frozen_prefix: batch.prefix_log_weights(i),
            });
            let b = if self.config.shared_replay { 0 } else { batch.assignment[i] };
            self.buffers[b].push(stored);
        }

        let mut groups = Vec::new();
        for b in 0..self.buffers.len() {
            let members = if self.config.shared_replay { (0..self.members.len()).collect() } else { vec![b] };
            let transitions = self.buffers[b].sample(self.config.batch_size, &mut self.replay_rng);
            if transitions.is_empty() {
                continue;
            }
            let (through, state) = self.weights(env, &transitions)?;
            groups.push(ReplayGroup { members, transitions, through, state });
        }

        let mut warnings = Vec::new();
        for g in &groups {
            let q_weights = match self.config.value_weighting {
                ValueWeighting::Action => g.through.clone(),
                ValueWeighting::State => g.state.clone(),
                ValueWeighting::None => vec![0.0; g.transitions.len()],
            };
            let x = transition_features(&g.transitions);
            let actions: Vec<Action> = g.transitions.iter().map(|t| t.action().clone()).collect();
            let states: Vec<&E::State> = g.transitions.iter().map(|t| t.state()).collect();
            for &m in &g.members {
                let y = vb_target(env, self.members[m].target(), &g.transitions, ctx.gamma_k, &self.gh)?;
                let member = &mut self.members[m];
                let outcome = member.q_step(
                    x.view(),
                    &actions,
                    &y,
                    &q_weights,
                    self.config.value_epochs,
                    self.config.target_interval,
                )?;
                if let UpdateOutcome::Skipped(msg) = outcome {
                    warnings.push(format!("member {m}: {msg}"));
                }
                if let VbMember::Policy { q, policy, p_opt, .. } = member {
                    let outcome = vb_policy_update(
                        env,
                        policy,
                        p_opt,
                        q,
                        &states,
                        x.view(),
                        &g.state,
                        self.config.vb_action_samples,
                        &self.gh,
                        self.config.policy_epochs,
                        &mut self.action_rng,
                    )?;
                    if let UpdateOutcome::Skipped(msg) = outcome {
                        warnings.push(format!("member {m}: {msg}"));
                    }
                }
            }
        }
        Ok(warnings)
    }

    fn mean_action(&self, env: &E, m: usize, state: &E::State) -> f64 {
        match &self.members[m] {
            VbMember::Derived { proposal, .. } => proposal
                .probs(env, state)
                .map_or(f64::NAN, |p| p.iter().enumerate().map(|(i, q)| i as f64 * q).sum()),
            VbMember::Policy { policy, .. } => policy.mean_action(&policy.net().forward(&env.features(state))),
        }
    }
}

/// Value-based adaptive importance sampling.
pub fn vb_ais<E: AdversarialMdp>(config: &EstimatorConfig, env: &E) -> Result<Estimate> {
    vb_ais_trained(config, env).map(|(est, _)| est)
}

/// [`vb_ais`], also returning the trained members.
pub fn vb_ais_trained<E: AdversarialMdp>(config: &EstimatorConfig, env: &E) -> Result<(Estimate, Vec<VbMember>)> {
    config.validate()?;
    let kind = env.action_kind();
    if let ActionKind::Continuous { dim } = kind {
        if dim != 1 {
            return Err(Error::InvalidArgument(format!("value-based estimation supports one action dimension, got {dim}")));
        }
    }
    let data = pretrain_data(config, env)?;
    let policies = match (kind, config.learn) {
        (ActionKind::Continuous { .. }, true) => init_policies(config, env, data.as_ref())?,
        _ => Vec::new(),
    };
    let mut members = Vec::new();
    if config.learn {
        for m in 0..config.mixture_size {
            let stream = (2u64 << 32) + m as u64;
            let mut q = QNet::new(kind, env.feature_dim(), &mut stream_rng(derive_seed(config.seed, TAG_INIT), stream));
            if let Some(d) = &data {
                let mut shuffle = stream_rng(derive_seed(config.seed, TAG_PRETRAIN_SHUFFLE), stream);
                pretrain_value(
                    &mut q,
                    d,
                    config.value_pretrain_target,
                    config.pretrain_epochs,
                    config.batch_size,
                    config.pretrain_adam(),
                    &mut shuffle,
                )?;
            }
            let q_opt = Adam::new(q.net.n_params(), config.adam());
            let target = q.clone();
            members.push(match kind {
                ActionKind::Discrete { .. } => {
                    VbMember::Derived { proposal: VbProposal { q, floor: config.prob_floor }, target, q_opt, updates: 0 }
                }
                ActionKind::Continuous { .. } => {
                    let policy = policies[m].clone();
                    let p_opt = Adam::new(policy.net().n_params(), config.adam());
                    VbMember::Policy { q, target, q_opt, updates: 0, policy, p_opt }
                }
            });
        }
    }
    let n_buffers = if config.shared_replay { 1 } else { config.mixture_size };
    let mut population = VbPopulation {
        members,
        buffers: (0..n_buffers).map(|_| ReplayBuffer::new(config.buffer_capacity)).collect(),
        config: config.clone(),
        gh: GaussHermite::new(config.quadrature_nodes),
        replay_rng: stream_rng(derive_seed(config.seed, TAG_REPLAY), 0),
        action_rng: stream_rng(derive_seed(config.seed, TAG_VB_ACTIONS), 0),
    };
    let est = run_adaptive(config, env, &mut population)?;
    Ok((est, population.members))
}
