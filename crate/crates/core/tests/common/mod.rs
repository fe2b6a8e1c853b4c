//! Checks shared by the focused test files and the acceptance target.
#![allow(dead_code)]

pub mod gradients;

use std::path::PathBuf;

use seqais::chain::{enumerate_q, exact_q, optimal_proposal, ChainMdp};
use seqais::estimators::{estimate, monte_carlo, sample_batch, weigh_batch, EstimatorConfig, Method, StateIndependent};
use seqais::harness::{ExperimentConfig, CHAIN_GAMMA};
use seqais::mdp::{rollout, stream_rng, AdversarialMdp, NominalDist, NominalProposal, Proposal};
use seqais::pendulum::Pendulum;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn shipped_config(rel: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&repo_root().join("configs").join(rel)).unwrap()
}

/// Largest `|Q_backward(s,a) − Q_enumerated(s,a)|` over every non-terminal pair.
pub fn q_table_error(env: &ChainMdp) -> f64 {
    let tables = exact_q(env, CHAIN_GAMMA).unwrap();
    let mut worst: f64 = 0.0;
    for (s, qs) in &tables.q_table {
        for (a, q) in qs.iter().enumerate() {
            worst = worst.max((q - enumerate_q(env, CHAIN_GAMMA, *s, a).unwrap()).abs());
        }
    }
    assert!(!tables.q_table.is_empty());
    worst
}

/// Largest `|w(τ)·1{R(τ) > γ} − μ|` over `n` rollouts of `q*`.
pub fn qstar_deviation(env: &ChainMdp, n: usize) -> f64 {
    let tables = exact_q(env, CHAIN_GAMMA).unwrap();
    let q = optimal_proposal(&tables).unwrap();
    (0..n)
        .map(|i| {
            let t = rollout(env, &q, 0, &mut stream_rng(3, i as u64)).unwrap();
            let v = if t.ret > CHAIN_GAMMA { t.log_weight().exp() } else { 0.0 };
            (v - tables.mu).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug)]
pub enum Weighting {
    Standard,
    DeterministicMixture,
    Defensive,
}

/// Mean of `runs` fixed-proposal estimates on the chain, as a z-score
/// against the exact `μ`.
pub fn fixed_proposal_z(env: &ChainMdp, weighting: Weighting, runs: usize, per_run: usize) -> f64 {
    let mu = exact_q(env, CHAIN_GAMMA).unwrap().mu;
    let a = StateIndependent::new(NominalDist::Categorical(vec![0.3, 0.3, 0.4]));
    let b = StateIndependent::new(NominalDist::Categorical(vec![0.5, 0.2, 0.3]));
    let (comps, fixed): (Vec<&dyn Proposal<ChainMdp>>, usize) = match weighting {
        Weighting::Standard => (vec![&a], 0),
        Weighting::DeterministicMixture => (vec![&a, &b], 0),
        Weighting::Defensive => (vec![&NominalProposal, &a], 1),
    };
    let estimates: Vec<f64> = (0..runs)
        .map(|r| {
            let trajs = sample_batch(env, &comps, per_run, 0, 1000 + r as u64).unwrap();
            let batch = weigh_batch(env, &comps, fixed, trajs).unwrap();
            let total: f64 = batch
                .trajectories
                .iter()
                .zip(&batch.log_weights)
                .filter(|(t, _)| t.ret > CHAIN_GAMMA)
                .map(|(_, lw)| lw.exp())
                .sum();
            total / per_run as f64
        })
        .collect();
    let n = runs as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean - mu) / (var / n).sqrt()
}

pub fn chain_config(method: Method, seed: u64) -> EstimatorConfig {
    let mut cfg = EstimatorConfig::for_method(method);
    cfg.gamma = CHAIN_GAMMA;
    cfg.n_total = 20_000;
    cfg.seed = seed;
    cfg
}

/// Relative errors of `trials` chain runs of `method` against the exact `μ`.
pub fn chain_relative_errors(method: Method, trials: usize) -> Vec<f64> {
    let env = ChainMdp::default();
    let mu = exact_q(&env, CHAIN_GAMMA).unwrap().mu;
    (0..trials)
        .map(|t| {
            let est = estimate(method, &chain_config(method, t as u64), &env).unwrap();
            (est.mu_hat - mu).abs() / mu
        })
        .collect()
}

/// True when `method` with learning disabled reproduces Monte Carlo bit for bit.
pub fn reduces_to_mc<E: AdversarialMdp>(env: &E, method: Method, gamma: f64, n_total: usize, seed: u64) -> bool {
    let mut cfg = EstimatorConfig::for_method(method);
    cfg.gamma = gamma;
    cfg.n_total = n_total;
    cfg.seed = seed;
    cfg.learn = false;
    let mut mc_cfg = EstimatorConfig::for_method(Method::Mc);
    mc_cfg.gamma = gamma;
    mc_cfg.n_total = n_total;
    mc_cfg.seed = seed;
    let a = estimate(method, &cfg, env).unwrap();
    let b = monte_carlo(&mc_cfg, env).unwrap();
    a.mu_hat.to_bits() == b.mu_hat.to_bits()
        && a.std_err.to_bits() == b.std_err.to_bits()
        && a.records.len() == b.records.len()
        && a.records.iter().zip(&b.records).all(|(x, y)| {
            x.ret.to_bits() == y.ret.to_bits() && x.log_weight.to_bits() == y.log_weight.to_bits()
        })
}

/// Reduction on all three environments, for every adaptive method.
pub fn reduction_cases() -> Vec<(String, bool)> {
    let mut out = Vec::new();
    let chain = ChainMdp::default();
    let disc = Pendulum::discrete();
    let cont = Pendulum::continuous();
    for method in [Method::Cem, Method::Pg, Method::Vb] {
        out.push((format!("{} chain", method.name()), reduces_to_mc(&chain, method, CHAIN_GAMMA, 3000, 5)));
        out.push((
            format!("{} pendulum-discrete", method.name()),
            reduces_to_mc(&disc, method, disc.gamma_fail, 3000, 6),
        ));
        out.push((
            format!("{} pendulum-continuous", method.name()),
            reduces_to_mc(&cont, method, cont.gamma_fail, 3000, 7),
        ));
    }
    out
}
