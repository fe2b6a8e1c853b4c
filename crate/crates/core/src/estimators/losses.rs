//! Training losses with analytic parameter gradients.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::mdp::Action;
use crate::neural::{Mlp, PolicyNet};

/// Weighted negative log-likelihood `−(1/norm) Σ_i c_i log q(a_i | s_i)`.
///
/// This is the policy-gradient surrogate (coefficients `1{R>γ}w − b(s)`) and
/// the score-function form of the value-based policy objective.
pub fn score_loss_grad(
    policy: &PolicyNet,
    features: ArrayView2<'_, f64>,
    actions: &[Action],
    coeffs: &[f64],
    norm: f64,
) -> Result<(f64, Vec<f64>)> {
    check_rows(features.nrows(), actions.len(), coeffs.len())?;
    let (total, mut grad) = policy.weighted_logprob_grad(features, actions, coeffs)?;
    let scale = -1.0 / norm;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((scale * total, grad))
}

/// Weighted squared error `(1/norm) Σ_i w_i (f(x_i)[col_i] − y_i)²`.
///
/// With `cols = None` every output column of row `i` is regressed onto `y_i`.
pub fn mse_loss_grad(
    net: &Mlp,
    inputs: ArrayView2<'_, f64>,
    cols: Option<&[usize]>,
    targets: &[f64],
    weights: Option<&[f64]>,
    norm: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = inputs.nrows();
    check_rows(n, targets.len(), weights.map_or(n, <[f64]>::len))?;
    if let Some(c) = cols {
        check_rows(n, c.len(), n)?;
    }
    let tape = net.forward_tape(inputs);
    let mut d_out = Array2::zeros(tape.output.dim());
    let mut loss = 0.0;
    for i in 0..n {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let mut one = |j: usize| {
            let r = tape.output[[i, j]] - targets[i];
            loss += w * r * r;
            d_out[[i, j]] = 2.0 * w * r / norm;
        };
        match cols {
            Some(c) => one(c[i]),
            None => (0..tape.output.ncols()).for_each(one),
        }
    }
    Ok((loss / norm, net.backward(&tape, d_out.view())))
}

fn check_rows(a: usize, b: usize, c: usize) -> Result<()> {
    if a == b && b == c {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("mismatched batch lengths {a}, {b}, {c}")))
    }
}

/// True when every entry is finite.
pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{stream_rng, ActionKind};
    use crate::neural::widths;
    use ndarray::array;

    #[test]
    fn zero_targets_zero_net() {
        let net = Mlp::zeros(&widths(2, 1));
        let x = array![[0.3, -0.2], [1.0, 0.5]];
        let (loss, g) = mse_loss_grad(&net, x.view(), None, &[0.0, 0.0], Some(&[1.0, 1.0]), 2.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_coefficients_zero_gradient() {
        let p = PolicyNet::for_kind(ActionKind::Continuous { dim: 1 }, 2, 0.5, &mut stream_rng(1, 0));
        let x = array![[0.3, -0.2], [1.0, 0.5]];
        let acts = [Action::scalar(0.1), Action::scalar(-0.4)];
        let (loss, g) = score_loss_grad(&p, x.view(), &acts, &[0.0, 0.0], 2.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mse_value_matches_direct() {
        let net = Mlp::new(&widths(2, 3), &mut stream_rng(4, 0));
        let x = array![[0.3, -0.2], [1.0, 0.5]];
        let out = net.forward_batch(x.view());
        let (loss, _) = mse_loss_grad(&net, x.view(), Some(&[2, 0]), &[0.1, -0.3], Some(&[2.0, 0.5]), 4.0).unwrap();
        let direct = (2.0 * (out[[0, 2]] - 0.1f64).powi(2) + 0.5 * (out[[1, 0]] + 0.3f64).powi(2)) / 4.0;
        assert!((loss - direct).abs() < 1e-15);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let net = Mlp::zeros(&widths(2, 1));
        let x = array![[0.3, -0.2]];
        assert!(mse_loss_grad(&net, x.view(), None, &[0.0, 1.0], None, 1.0).is_err());
    }
}
