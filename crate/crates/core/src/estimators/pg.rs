use ndarray::Array2;

use super::adaptive::{run_adaptive, IterationContext, Population};
use super::losses::{all_finite, mse_loss_grad, score_loss_grad};
use super::mixture::WeightedBatch;
use super::pretrain::{collect_nominal_states, pretrain_constant, pretrain_policy, NominalStates};
use super::{derive_seed, EstimatorConfig, Estimate, TAG_INIT, TAG_PRETRAIN_DATA, TAG_PRETRAIN_SHUFFLE};
use crate::error::Result;
use crate::mdp::{stream_rng, Action, AdversarialMdp, Proposal};
use crate::neural::{features_matrix, widths, Adam, Mlp, PolicyNet};

/// Result of one gradient update.
#[derive(Clone, Debug, PartialEq)]
pub enum UpdateOutcome {
    Updated { loss: f64 },
    Skipped(String),
}

/// A proposal policy with its optimizer and optional baseline network.
#[derive(Clone, Debug)]
pub struct PgMember {
    pub policy: PolicyNet,
    pub opt: Adam,
    pub baseline: Option<(Mlp, Adam)>,
}

/// `epochs` full-batch Adam steps on `−(1/n) Σ_rows c · log q(a|s)`.
pub fn pg_update(
    policy: &mut PolicyNet,
    opt: &mut Adam,
    features: &Array2<f64>,
    actions: &[Action],
    coeffs: &[f64],
    n: usize,
    epochs: usize,
) -> Result<UpdateOutcome> {
    if coeffs.iter().all(|&c| c == 0.0) {
        return Ok(UpdateOutcome::Skipped("all policy coefficients are zero".into()));
    }
    let mut last = f64::NAN;
    for _ in 0..epochs {
        let (loss, g) = score_loss_grad(policy, features.view(), actions, coeffs, n as f64)?;
        if !loss.is_finite() || !all_finite(&g) {
            return Ok(UpdateOutcome::Skipped("non-finite policy gradient".into()));
        }
        opt.step(policy.net_mut().params_mut(), &g);
        last = loss;
    }
    Ok(UpdateOutcome::Updated { loss: last })
}

/// `epochs` full-batch Adam steps on `(1/n) Σ_rows (b(s) − target)²`.
pub fn baseline_update(
    net: &mut Mlp,
    opt: &mut Adam,
    features: &Array2<f64>,
    targets: &[f64],
    n: usize,
    epochs: usize,
) -> Result<UpdateOutcome> {
    let mut last = f64::NAN;
    for _ in 0..epochs {
        let (loss, g) = mse_loss_grad(net, features.view(), None, targets, None, n as f64)?;
        if !loss.is_finite() || !all_finite(&g) {
            return Ok(UpdateOutcome::Skipped("non-finite baseline gradient".into()));
        }
        opt.step(net.params_mut(), &g);
        last = loss;
    }
    Ok(UpdateOutcome::Updated { loss: last })
}

struct PgPopulation {
    members: Vec<PgMember>,
    epochs: usize,
}

impl PgMember {
    fn train<E: AdversarialMdp>(
        &mut self,
        env: &E,
        batch: &WeightedBatch<E::State>,
        assigned: &[usize],
        gamma_k: f64,
        epochs: usize,
    ) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let n = assigned.len();
        if n == 0 {
            return Ok(vec!["no samples assigned".into()]);
        }
        // Coefficients share the factor e^{-top}, top being the largest elite
        // log-weight of the batch; the loss is normalized by their mean.
        let scaled = batch.elite_coefficients(gamma_k);
        let mean_c = assigned.iter().map(|&i| scaled[i]).sum::<f64>() / n as f64;
        if !(mean_c > 0.0) {
            return Ok(vec!["no elite samples assigned; policy unchanged".into()]);
        }

        let use_rows = |i: usize| self.baseline.is_some() || scaled[i] > 0.0;
        let mut rows = Vec::new();
        let mut actions = Vec::new();
        let mut traj_coeff = Vec::new();
        for &i in assigned.iter().filter(|&&i| use_rows(i)) {
            let t = &batch.trajectories[i];
            for (s, a) in t.states.iter().zip(&t.actions) {
                rows.push(env.features(s));
                actions.push(a.clone());
                traj_coeff.push(scaled[i]);
            }
        }
        let x = features_matrix(&rows);
        let mut coeffs: Vec<f64> = traj_coeff.iter().map(|c| c / mean_c).collect();

        if let Some((net, opt)) = &mut self.baseline {
            // The baseline regresses on raw coefficients 1{R>γ}·w.
            let top = batch
                .trajectories
                .iter()
                .zip(&batch.log_weights)
                .filter(|(t, _)| t.ret > gamma_k)
                .map(|(_, &lw)| lw)
                .fold(f64::NEG_INFINITY, f64::max);
            let unscale = top.exp();
            if unscale > 0.0 && unscale.is_finite() {
                let b = net.forward_batch(x.view());
                for (c, bv) in coeffs.iter_mut().zip(b.column(0)) {
                    *c -= bv / unscale / mean_c;
                }
                let raw: Vec<f64> = traj_coeff.iter().map(|c| c * unscale).collect();
                if let UpdateOutcome::Skipped(msg) = baseline_update(net, opt, &x, &raw, n, epochs)? {
                    warnings.push(msg);
                }
            } else {
                warnings.push(format!("elite weights out of range (log {top}); baseline skipped"));
            }
        }
        if let UpdateOutcome::Skipped(msg) = pg_update(&mut self.policy, &mut self.opt, &x, &actions, &coeffs, n, epochs)? {
            warnings.push(msg);
        }
        Ok(warnings)
    }
}

impl<E: AdversarialMdp> Population<E> for PgPopulation {
    fn members(&self) -> Vec<&dyn Proposal<E>> {
        self.members.iter().map(|m| &m.policy as &dyn Proposal<E>).collect()
    }

    fn update(&mut self, env: &E, batch: &WeightedBatch<E::State>, ctx: IterationContext) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        for (m, member) in self.members.iter_mut().enumerate() {
            let assigned = batch.assigned_to(m);
            for w in member.train(env, batch, &assigned, ctx.gamma_k, self.epochs)? {
                warnings.push(format!("member {m}: {w}"));
            }
        }
        Ok(warnings)
    }

    fn mean_action(&self, env: &E, m: usize, state: &E::State) -> f64 {
        let p = &self.members[m].policy;
        p.mean_action(&p.net().forward(&env.features(state)))
    }
}

/// Nominal (state, action) data for pretraining, when enabled.
pub(crate) fn pretrain_data<E: AdversarialMdp>(config: &EstimatorConfig, env: &E) -> Result<Option<NominalStates>> {
    if config.pretrain && config.learn {
        collect_nominal_states(env, config.pretrain_points, derive_seed(config.seed, TAG_PRETRAIN_DATA)).map(Some)
    } else {
        Ok(None)
    }
}

/// Fresh (optionally pretrained) policies, one per mixture member, each with
/// its own initialization stream.
pub(crate) fn init_policies<E: AdversarialMdp>(
    config: &EstimatorConfig,
    env: &E,
    data: Option<&NominalStates>,
) -> Result<Vec<PolicyNet>> {
    (0..config.mixture_size)
        .map(|m| {
            let mut rng = stream_rng(derive_seed(config.seed, TAG_INIT), m as u64);
            let mut p = PolicyNet::for_kind(env.action_kind(), env.feature_dim(), config.init_std, &mut rng);
            if let Some(d) = data {
                let mut shuffle = stream_rng(derive_seed(config.seed, TAG_PRETRAIN_SHUFFLE), m as u64);
                pretrain_policy(&mut p, d, config.pretrain_epochs, config.batch_size, config.pretrain_adam(), &mut shuffle)?;
            }
            Ok(p)
        })
        .collect()
}

/// Fresh (optionally pretrained) single-output value network for member `m`.
pub(crate) fn init_value_net(
    config: &EstimatorConfig,
    inputs: Option<&Array2<f64>>,
    widths: &[usize],
    m: usize,
) -> Result<Mlp> {
    let stream = (1u64 << 32) + m as u64;
    let mut net = Mlp::new(widths, &mut stream_rng(derive_seed(config.seed, TAG_INIT), stream));
    if let Some(x) = inputs {
        let mut shuffle = stream_rng(derive_seed(config.seed, TAG_PRETRAIN_SHUFFLE), stream);
        pretrain_constant(
            &mut net,
            x,
            config.value_pretrain_target,
            config.pretrain_epochs,
            config.batch_size,
            config.pretrain_adam(),
            &mut shuffle,
        )?;
    }
    Ok(net)
}

/// Policy-gradient adaptive importance sampling.
pub fn pg_ais<E: AdversarialMdp>(config: &EstimatorConfig, env: &E) -> Result<Estimate> {
    config.validate()?;
    let data = pretrain_data(config, env)?;
    let policies = if config.learn { init_policies(config, env, data.as_ref())? } else { Vec::new() };
    let members = policies
        .into_iter()
        .enumerate()
        .map(|(m, policy)| {
            let baseline = if config.baseline {
                let net = init_value_net(config, data.as_ref().map(|d| &d.features), &widths(env.feature_dim(), 1), m)?;
                let opt = Adam::new(net.n_params(), config.adam());
                Some((net, opt))
            } else {
                None
            };
            let opt = Adam::new(policy.net().n_params(), config.adam());
            Ok(PgMember { policy, opt, baseline })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut population = PgPopulation { members, epochs: config.policy_epochs };
    run_adaptive(config, env, &mut population)
}
