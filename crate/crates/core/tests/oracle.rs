//! Exact checks against the enumerable chain.

mod common;

use common::{fixed_proposal_z, q_table_error, qstar_deviation, Weighting};
use seqais::chain::ChainMdp;
use seqais::estimators::{sample_batch, weigh_batch};
use seqais::mdp::{NominalProposal, Proposal};
use seqais::pendulum::Pendulum;

#[test]
fn backward_induction_matches_enumeration() {
    assert!(q_table_error(&ChainMdp::default()) <= 1e-12);
    // A longer chain with a different nominal.
    let env = ChainMdp::new(7, vec![0.6, 0.3, 0.1], 8);
    assert!(q_table_error(&env) <= 1e-12);
}

#[test]
fn optimal_proposal_has_zero_variance() {
    assert!(qstar_deviation(&ChainMdp::default(), 2000) <= 1e-9);
    assert!(qstar_deviation(&ChainMdp::new(7, vec![0.6, 0.3, 0.1], 8), 2000) <= 1e-9);
}

#[test]
fn standard_weights_are_unbiased() {
    let z = fixed_proposal_z(&ChainMdp::default(), Weighting::Standard, 200, 500);
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn mixture_weights_are_unbiased() {
    let z = fixed_proposal_z(&ChainMdp::default(), Weighting::DeterministicMixture, 200, 500);
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn defensive_weights_are_unbiased() {
    let z = fixed_proposal_z(&ChainMdp::default(), Weighting::Defensive, 200, 500);
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn single_member_mixture_weight_is_the_standard_weight() {
    let env = Pendulum::continuous();
    let comps: [&dyn Proposal<Pendulum>; 1] = [&NominalProposal];
    let trajs = sample_batch(&env, &comps, 50, 0, 9).unwrap();
    let expected: Vec<u64> = trajs.iter().map(|t| t.log_weight().to_bits()).collect();
    let batch = weigh_batch(&env, &comps, 0, trajs).unwrap();
    let got: Vec<u64> = batch.log_weights.iter().map(|w| w.to_bits()).collect();
    assert_eq!(got, expected);
}
