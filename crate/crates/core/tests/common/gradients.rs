//! Central-difference checks of the training losses.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use seqais::estimators::{mse_loss_grad, score_loss_grad, QNet};
use seqais::mdp::{stream_rng, Action, ActionKind};
use seqais::neural::{widths, Mlp, PolicyNet};

const H: f64 = 1e-6;

/// `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)` over all parameters.
fn fd_rel_error(params: &[f64], grad: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = params.to_vec();
    let mut diff = 0.0;
    let mut norm_a = 0.0;
    let mut norm_b = 0.0;
    for j in 0..p.len() {
        let x = p[j];
        p[j] = x + H;
        let up = loss(&p);
        p[j] = x - H;
        let down = loss(&p);
        p[j] = x;
        let fd = (up - down) / (2.0 * H);
        diff += (fd - grad[j]).powi(2);
        norm_a += grad[j].powi(2);
        norm_b += fd * fd;
    }
    assert!(norm_a > 0.0, "gradient is identically zero; the check would be vacuous");
    diff.sqrt() / norm_a.sqrt().max(norm_b.sqrt())
}

fn random_features(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, 0);
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

fn with_params(policy: &PolicyNet, p: &[f64]) -> PolicyNet {
    let mut out = policy.clone();
    out.net_mut().params_mut().copy_from_slice(p);
    out
}

fn score_check(policy: &PolicyNet, x: ArrayView2<'_, f64>, actions: &[Action], coeffs: &[f64], norm: f64) -> f64 {
    let (_, g) = score_loss_grad(policy, x, actions, coeffs, norm).unwrap();
    fd_rel_error(policy.net().params(), &g, |p| {
        score_loss_grad(&with_params(policy, p), x, actions, coeffs, norm).unwrap().0
    })
}

pub fn rollout_gradient_discrete() -> f64 {
    let kind = ActionKind::Discrete { n: 3 };
    let policy = PolicyNet::for_kind(kind, 4, 1.0, &mut stream_rng(1, 0));
    let x = random_features(12, 4, 2);
    let actions: Vec<_> = (0..12).map(|i| Action::Discrete(i % 3)).collect();
    // Elite indicator times weight; zeros for the non-elite rows.
    let coeffs: Vec<f64> = (0..12).map(|i| if i % 4 == 0 { 0.0 } else { 0.3 + 0.1 * i as f64 }).collect();
    let err = score_check(&policy, x.view(), &actions, &coeffs, 9.0);
    err
}

pub fn rollout_gradient_continuous() -> f64 {
    let kind = ActionKind::Continuous { dim: 1 };
    let policy = PolicyNet::for_kind(kind, 3, 0.7, &mut stream_rng(3, 0));
    let x = random_features(10, 3, 4);
    let actions: Vec<_> = (0..10).map(|i| Action::scalar(0.4 * (i as f64 - 4.5))).collect();
    let coeffs: Vec<f64> = (0..10).map(|i| 1.0 + (i as f64).sin()).collect();
    let err = score_check(&policy, x.view(), &actions, &coeffs, 10.0);
    err
}

pub fn baseline_loss() -> f64 {
    let net = Mlp::new(&widths(4, 1), &mut stream_rng(5, 0));
    let x = random_features(16, 4, 6);
    let targets: Vec<f64> = (0..16).map(|i| if i % 3 == 0 { 1.7 } else { 0.0 }).collect();
    let (_, g) = mse_loss_grad(&net, x.view(), None, &targets, None, 16.0).unwrap();
    let err = fd_rel_error(net.params(), &g, |p| {
        let n = Mlp::from_params(net.widths(), p.to_vec()).unwrap();
        mse_loss_grad(&n, x.view(), None, &targets, None, 16.0).unwrap().0
    });
    err
}

pub fn value_policy_loss() -> f64 {
    // Score-function form: K sampled actions per state with fixed
    // self-normalized ratios times the state weight.
    let kind = ActionKind::Continuous { dim: 1 };
    let policy = PolicyNet::for_kind(kind, 3, 0.5, &mut stream_rng(7, 0));
    let PolicyNet::Gaussian(head) = &policy else { unreachable!() };
    let states = random_features(5, 3, 8);
    let out = head.net.forward_batch(states.view());
    let k = 4;
    let mut rng = stream_rng(9, 0);
    let mut rows = Array2::zeros((5 * k, 3));
    let mut actions = Vec::new();
    let mut coeffs = Vec::new();
    let state_w = [0.2, 1.0, 0.5, 3.0, 0.05];
    for i in 0..5 {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = raw.iter().sum();
        for (j, r) in raw.iter().enumerate() {
            let xi = [rng.sample::<f64, _>(StandardNormal)];
            let a = head.rsample(out.row(i).as_slice().unwrap(), &xi);
            rows.row_mut(i * k + j).assign(&states.row(i));
            actions.push(Action::Continuous(a.into()));
            coeffs.push(state_w[i] * r / total);
        }
    }
    let norm: f64 = state_w.iter().sum();
    score_check(&policy, rows.view(), &actions, &coeffs, norm)
}

fn q_loss_check(q: &QNet, x: ArrayView2<'_, f64>, actions: &[Action], targets: &[f64], w: &[f64]) -> f64 {
    let (inputs, cols) = q.inputs(x, actions).unwrap();
    let total: f64 = w.iter().sum();
    let (_, g) = mse_loss_grad(&q.net, inputs.view(), Some(&cols), targets, Some(w), total).unwrap();
    fd_rel_error(q.net.params(), &g, |p| {
        let n = Mlp::from_params(q.net.widths(), p.to_vec()).unwrap();
        mse_loss_grad(&n, inputs.view(), Some(&cols), targets, Some(w), total).unwrap().0
    })
}


pub fn value_loss_discrete() -> f64 {
    let kind = ActionKind::Discrete { n: 3 };
    let q = QNet::new(kind, 4, &mut stream_rng(10, 0));
    let x = random_features(9, 4, 11);
    let actions: Vec<_> = (0..9).map(|i| Action::Discrete((i * 2) % 3)).collect();
    let targets: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).cos().abs()).collect();
    let w: Vec<f64> = (0..9).map(|i| 0.1 + 0.3 * i as f64).collect();
    let err = q_loss_check(&q, x.view(), &actions, &targets, &w);
    err
}

pub fn value_loss_continuous() -> f64 {
    let kind = ActionKind::Continuous { dim: 1 };
    let q = QNet::new(kind, 3, &mut stream_rng(12, 0));
    let x = random_features(8, 3, 13);
    let actions: Vec<_> = (0..8).map(|i| Action::scalar(0.25 * i as f64 - 1.0)).collect();
    let targets: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { 0.2 }).collect();
    let w: Vec<f64> = (0..8).map(|i| (0.2 * i as f64).exp()).collect();
    let err = q_loss_check(&q, x.view(), &actions, &targets, &w);
    err
}

pub fn reparameterized_sampling_through_network() -> f64 {
    // L(θ) = Σ_i f(μ_θ(s_i) + σ_θ(s_i) ξ_i) with fixed noise.
    let f = |a: f64| a.sin() + 0.5 * a * a;
    let df = |a: f64| a.cos() + a;
    let policy = PolicyNet::for_kind(ActionKind::Continuous { dim: 1 }, 3, 0.8, &mut stream_rng(14, 0));
    let PolicyNet::Gaussian(head) = &policy else { unreachable!() };
    let x = random_features(6, 3, 15);
    let mut rng = stream_rng(16, 0);
    let xis: Vec<[f64; 1]> = (0..6).map(|_| [rng.sample(StandardNormal)]).collect();

    let tape = head.net.forward_tape(x.view());
    let mut d_out = Array2::zeros(tape.output.dim());
    for i in 0..6 {
        let o = tape.output.row(i).to_vec();
        let a = head.rsample(&o, &xis[i]);
        let d = head.rsample_pullback(&o, &xis[i], &[df(a[0])]);
        d_out.row_mut(i).assign(&ndarray::Array1::from(d));
    }
    let g = head.net.backward(&tape, d_out.view());
    let err = fd_rel_error(head.net.params(), &g, |p| {
        let PolicyNet::Gaussian(h) = with_params(&policy, p) else { unreachable!() };
        let out = h.net.forward_batch(x.view());
        (0..6).map(|i| f(h.rsample(out.row(i).as_slice().unwrap(), &xis[i])[0])).sum()
    });
    err
}

/// Every check with its tolerance.
pub fn all() -> Vec<(&'static str, f64, f64)> {
    vec![
        ("rollout_gradient_discrete", rollout_gradient_discrete(), 1e-4),
        ("rollout_gradient_continuous", rollout_gradient_continuous(), 1e-4),
        ("baseline_loss", baseline_loss(), 1e-4),
        ("value_policy_loss", value_policy_loss(), 1e-4),
        ("value_loss_discrete", value_loss_discrete(), 1e-4),
        ("value_loss_continuous", value_loss_continuous(), 1e-4),
        ("reparameterized_sampling_through_network", reparameterized_sampling_through_network(), 1e-3),
    ]
}
