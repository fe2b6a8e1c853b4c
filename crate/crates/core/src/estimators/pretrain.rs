use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use super::losses::{mse_loss_grad, score_loss_grad};
use super::vb::QNet;
use crate::error::Result;
use crate::mdp::{rollout, stream_rng, Action, AdversarialMdp, NominalProposal, StreamRng};
use crate::neural::{features_matrix, Adam, AdamConfig, Mlp, PolicyNet};

/// States visited by nominal rollouts, with the nominal action taken there.
#[derive(Clone, Debug)]
pub struct NominalStates {
    pub features: Array2<f64>,
    pub actions: Vec<Action>,
}

impl NominalStates {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Collects `n_points` (state, action) pairs from nominal rollouts, using
/// random streams `(seed, 0), (seed, 1), …`.
pub fn collect_nominal_states<E: AdversarialMdp>(env: &E, n_points: usize, seed: u64) -> Result<NominalStates> {
    let mut rows = Vec::with_capacity(n_points);
    let mut actions = Vec::with_capacity(n_points);
    let mut i = 0;
    while rows.len() < n_points {
        let traj = rollout(env, &NominalProposal, 0, &mut stream_rng(seed, i))?;
        for (s, a) in traj.states.iter().zip(&traj.actions).take(n_points - rows.len()) {
            rows.push(env.features(s));
            actions.push(a.clone());
        }
        i += 1;
    }
    Ok(NominalStates { features: features_matrix(&rows), actions })
}

fn minibatches(n: usize, batch: usize, rng: &mut StreamRng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

/// Maximum-likelihood fit of `policy` to the nominal actions.
pub fn pretrain_policy(
    policy: &mut PolicyNet,
    data: &NominalStates,
    epochs: usize,
    batch: usize,
    adam: AdamConfig,
    rng: &mut StreamRng,
) -> Result<()> {
    let mut opt = Adam::new(policy.net().n_params(), adam);
    for _ in 0..epochs {
        for idx in minibatches(data.len(), batch, rng) {
            let x = data.features.select(Axis(0), &idx);
            let acts: Vec<Action> = idx.iter().map(|&i| data.actions[i].clone()).collect();
            let ones = vec![1.0; idx.len()];
            let (_, g) = score_loss_grad(policy, x.view(), &acts, &ones, idx.len() as f64)?;
            opt.step(policy.net_mut().params_mut(), &g);
        }
    }
    Ok(())
}

/// Regresses every output of `net` onto the constant `target`.
pub fn pretrain_constant(
    net: &mut Mlp,
    inputs: &Array2<f64>,
    target: f64,
    epochs: usize,
    batch: usize,
    adam: AdamConfig,
    rng: &mut StreamRng,
) -> Result<()> {
    let mut opt = Adam::new(net.n_params(), adam);
    for _ in 0..epochs {
        for idx in minibatches(inputs.nrows(), batch, rng) {
            let x = inputs.select(Axis(0), &idx);
            let y = vec![target; idx.len()];
            let (_, g) = mse_loss_grad(net, x.view(), None, &y, None, idx.len() as f64)?;
            opt.step(net.params_mut(), &g);
        }
    }
    Ok(())
}

/// Regresses a state-action value network onto `target` at the nominal data.
pub fn pretrain_value(
    q: &mut QNet,
    data: &NominalStates,
    target: f64,
    epochs: usize,
    batch: usize,
    adam: AdamConfig,
    rng: &mut StreamRng,
) -> Result<()> {
    let (inputs, _) = q.inputs(data.features.view(), &data.actions)?;
    pretrain_constant(&mut q.net, &inputs, target, epochs, batch, adam, rng)
}
