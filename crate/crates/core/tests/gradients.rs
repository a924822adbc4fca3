//! Finite-difference verification of every analytic backward rule; the
//! machinery lives in `common::gradcheck` and is shared with the acceptance
//! suite.

mod common;

use common::gradcheck;

fn assert_pass(outcome: &gradcheck::Outcome) {
    println!(
        "{}: worst relative error {:.3e} (threshold {:.1e})",
        outcome.name, outcome.worst, outcome.threshold
    );
    assert!(
        outcome.pass(),
        "{}: {:.3e} exceeds {:.1e}",
        outcome.name,
        outcome.worst,
        outcome.threshold
    );
}

#[test]
fn dense_gradients_match_finite_differences() {
    assert_pass(&gradcheck::check_dense());
}

#[test]
fn conv_gradients_match_finite_differences() {
    assert_pass(&gradcheck::check_conv());
}

#[test]
fn maxpool_gradients_match_finite_differences() {
    assert_pass(&gradcheck::check_maxpool());
}

#[test]
fn activation_gradients_match_finite_differences() {
    for outcome in gradcheck::check_activations() {
        assert_pass(&outcome);
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    for outcome in gradcheck::check_losses() {
        assert_pass(&outcome);
    }
}

#[test]
fn stacked_network_preserves_shape_contracts() {
    gradcheck::check_stacked_shapes();
}

#[test]
fn inn_end_to_end_gradient_matches_finite_differences() {
    assert_pass(&gradcheck::check_inn_end_to_end());
}
