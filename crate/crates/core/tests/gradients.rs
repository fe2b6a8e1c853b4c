//! Central-difference checks of every training loss against its analytic gradient.

mod common;

use common::gradients::*;

#[test]
fn rollout_gradient_discrete_matches() {
    let err = rollout_gradient_discrete();
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn rollout_gradient_continuous_matches() {
    let err = rollout_gradient_continuous();
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn baseline_loss_matches() {
    let err = baseline_loss();
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn value_policy_loss_matches() {
    let err = value_policy_loss();
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn value_loss_discrete_matches() {
    let err = value_loss_discrete();
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn value_loss_continuous_matches() {
    let err = value_loss_continuous();
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn reparameterized_sampling_through_network_matches() {
    let err = reparameterized_sampling_through_network();
    assert!(err < 1e-3, "relative error {err:e}");
}
