//! Logistic regression by full-batch gradient descent.

use crate::error::Result;

use super::{balanced_weights, dot, sigmoid, softplus, uniform_weights, LinearModel, ModelKind};

/// Convergence: gradient infinity-norm at or below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

/// Iteration cap when the tolerance is not reached.
pub const MAX_ITERATIONS: usize = 1000;

const ARMIJO_C: f64 = 1e-4;

/// Summed weighted cross-entropy plus lambda * |w|^2 (bias
/// unregularized), with its gradient in (w, b).
///
/// Public so the gradient can be checked against finite differences.
pub fn objective_and_gradient(
    x: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    lambda: f64,
    w: &[f64],
    b: f64,
) -> (f64, Vec<f64>, f64) {
    let dim = w.len();
    let mut value = lambda * dot(w, w);
    let mut grad_w = vec![0.0; dim];
    for (g, wi) in grad_w.iter_mut().zip(w) {
        *g = 2.0 * lambda * wi;
    }
    let mut grad_b = 0.0;
    for ((row, &y), &u) in x.iter().zip(labels).zip(weights) {
        let z = dot(w, row) + b;
        value += u * (softplus(z) - y as f64 * z);
        let r = u * (sigmoid(z) - y as f64);
        for (g, xi) in grad_w.iter_mut().zip(row) {
            *g += r * xi;
        }
        grad_b += r;
    }
    (value, grad_w, grad_b)
}

/// Trains a logistic model on standardized features.
///
/// Full-batch gradient descent with backtracking line search; stops at
/// [`GRADIENT_TOLERANCE`] on the gradient infinity-norm or after
/// [`MAX_ITERATIONS`]. With `balanced`, positive-sample losses are
/// weighted by the negative/positive count ratio.
pub fn train_logistic(
    x: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    balanced: bool,
) -> Result<LinearModel> {
    let weights = if balanced {
        balanced_weights(labels)?
    } else {
        uniform_weights(labels)?
    };
    let dim = x.first().map(Vec::len).unwrap_or(0);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut step = 1.0;

    let (mut value, mut grad_w, mut grad_b) =
        objective_and_gradient(x, labels, &weights, lambda, &w, b);
    for _ in 0..MAX_ITERATIONS {
        let grad_inf = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf <= GRADIENT_TOLERANCE {
            break;
        }
        let grad_sq = dot(&grad_w, &grad_w) + grad_b * grad_b;

        // Backtracking from twice the last accepted step.
        step *= 2.0;
        loop {
            let w_next: Vec<f64> = w.iter().zip(&grad_w).map(|(wi, g)| wi - step * g).collect();
            let b_next = b - step * grad_b;
            let (value_next, gw_next, gb_next) =
                objective_and_gradient(x, labels, &weights, lambda, &w_next, b_next);
            if value_next <= value - ARMIJO_C * step * grad_sq {
                w = w_next;
                b = b_next;
                value = value_next;
                grad_w = gw_next;
                grad_b = gb_next;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                break;
            }
        }
        if step < 1e-20 {
            break;
        }
    }

    Ok(LinearModel {
        kind: ModelKind::Logistic,
        weights: w,
        bias: b,
        lambda,
        platt: None,
    })
}
