//! Soft-margin support vector machines trained in the dual.
//!
//! Both the linear and the RBF machine solve the class-weighted dual
//! with sequential minimal optimization on the most violating pair.
//! The primal cost lambda*|w|^2 + sum of weighted hinge losses maps to
//! per-sample box constraints C_i = weight_i / (2*lambda). The linear
//! machine collapses its dual solution to an explicit weight vector;
//! the RBF machine keeps its support vectors.

use crate::error::{Error, Result};

use super::platt::{fit_platt, PlattCalibrator};
use super::{balanced_weights, dot, uniform_weights, LinearModel, ModelKind};

/// SMO stops when the worst KKT violation falls to this.
pub const KKT_TOLERANCE: f64 = 1e-3;

/// Hinge loss of one sample given its label-signed margin c*(w'x+b).
pub fn hinge_loss(signed_margin: f64) -> f64 {
    (1.0 - signed_margin).max(0.0)
}

/// RBF kernel of Eq-style form exp(-|a-b|^2 / gamma): gamma divides.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let dist_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-dist_sq / gamma).exp()
}

/// Kernel SVM: support vectors, dual coefficients alpha_i*c_i, bias.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub platt: Option<PlattCalibrator>,
}

impl KernelModel {
    /// Raw decision value: the kernel expansion over support vectors.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if let Some(sv) = self.support_vectors.first() {
            if sv.len() != x.len() {
                return Err(Error::Config(format!(
                    "input dimension {} does not match model dimension {}",
                    x.len(),
                    sv.len()
                )));
            }
        }
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * rbf_kernel(sv, x, self.gamma))
            .sum();
        Ok(sum + self.bias)
    }

    /// Calibrated COVID-class probability.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let decision = self.decision(x)?;
        match &self.platt {
            Some(platt) => Ok(platt.probability(decision)),
            None => Err(Error::Config(
                "rbf_svm model has no calibrator; cannot emit a probability".into(),
            )),
        }
    }
}

/// Dense symmetric Gram matrix.
struct Gram {
    values: Vec<f64>,
    n: usize,
}

impl Gram {
    fn build(x: &[Vec<f64>], kernel: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Gram {
        let n = x.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = kernel(&x[i], &x[j]);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Gram { values, n }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Dual coefficients alpha and bias from SMO on the most violating pair.
///
/// `y` holds labels in {-1, +1}, `c` the per-sample box bounds. Ties in
/// pair selection go to the lowest index, so the solve is deterministic.
fn smo(gram: &Gram, y: &[f64], c: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij.
    let mut grad = vec![-1.0; n];
    let max_iter = 200_000.max(100 * n);

    let in_up = |i: usize, alpha: &[f64]| {
        (y[i] > 0.0 && alpha[i] < c[i]) || (y[i] < 0.0 && alpha[i] > 0.0)
    };
    let in_low = |i: usize, alpha: &[f64]| {
        (y[i] > 0.0 && alpha[i] > 0.0) || (y[i] < 0.0 && alpha[i] < c[i])
    };

    for _ in 0..max_iter {
        // i maximizes -y*grad over the up set, j minimizes it over the
        // low set; the gap between them is the KKT violation.
        let mut i_best: Option<(usize, f64)> = None;
        let mut j_best: Option<(usize, f64)> = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(t, &alpha) && i_best.map_or(true, |(_, best)| v > best) {
                i_best = Some((t, v));
            }
            if in_low(t, &alpha) && j_best.map_or(true, |(_, best)| v < best) {
                j_best = Some((t, v));
            }
        }
        let (Some((i, up)), Some((j, low))) = (i_best, j_best) else {
            break;
        };
        if up - low <= KKT_TOLERANCE {
            break;
        }

        let eta = (gram.at(i, i) + gram.at(j, j) - 2.0 * gram.at(i, j)).max(1e-12);
        let step = (up - low) / eta;
        let cap_i = if y[i] > 0.0 { c[i] - alpha[i] } else { alpha[i] };
        let cap_j = if y[j] > 0.0 { alpha[j] } else { c[j] - alpha[j] };
        let t = step.min(cap_i).min(cap_j);

        let delta_i = y[i] * t;
        let delta_j = -y[j] * t;
        alpha[i] = (alpha[i] + delta_i).clamp(0.0, c[i]);
        alpha[j] = (alpha[j] + delta_j).clamp(0.0, c[j]);
        snap(&mut alpha[i], c[i]);
        snap(&mut alpha[j], c[j]);

        for s in 0..n {
            grad[s] += y[s] * (y[i] * gram.at(s, i) * delta_i + y[j] * gram.at(s, j) * delta_j);
        }
    }

    // Bias from the KKT conditions: -y*grad equals the margin offset for
    // free support vectors; otherwise the violation interval midpoint.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        if alpha[t] > 0.0 && alpha[t] < c[t] {
            free_sum += -y[t] * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let up = (0..n)
            .filter(|&t| in_up(t, &alpha))
            .map(|t| -y[t] * grad[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let low = (0..n)
            .filter(|&t| in_low(t, &alpha))
            .map(|t| -y[t] * grad[t])
            .fold(f64::INFINITY, f64::min);
        (up + low) / 2.0
    };
    (alpha, bias)
}

/// Snaps near-bound coefficients exactly onto the bound so support
/// vector and free-vector sets are crisp.
fn snap(alpha: &mut f64, c: f64) {
    if *alpha < 1e-12 * c {
        *alpha = 0.0;
    } else if *alpha > c * (1.0 - 1e-12) {
        *alpha = c;
    }
}

fn prepare(
    x: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    balanced: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if lambda <= 0.0 {
        return Err(Error::Config(format!(
            "svm regularization must be positive, got {lambda}"
        )));
    }
    if x.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} rows for {} labels",
            x.len(),
            labels.len()
        )));
    }
    let weights = if balanced {
        balanced_weights(labels)?
    } else {
        uniform_weights(labels)?
    };
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let c: Vec<f64> = weights.iter().map(|u| u / (2.0 * lambda)).collect();
    Ok((y, c))
}

/// Trains an uncalibrated linear SVM; the dual solution is collapsed to
/// an explicit weight vector.
pub fn train_linear_svm(
    x: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    balanced: bool,
) -> Result<LinearModel> {
    let (y, c) = prepare(x, labels, lambda, balanced)?;
    let gram = Gram::build(x, dot);
    let (alpha, bias) = smo(&gram, &y, &c);
    let dim = x.first().map(Vec::len).unwrap_or(0);
    let mut weights = vec![0.0; dim];
    for ((a, yi), row) in alpha.iter().zip(&y).zip(x) {
        if *a > 0.0 {
            for (w, v) in weights.iter_mut().zip(row) {
                *w += a * yi * v;
            }
        }
    }
    Ok(LinearModel {
        kind: ModelKind::LinearSvm,
        weights,
        bias,
        lambda,
        platt: None,
    })
}

/// Trains an uncalibrated RBF-kernel SVM.
pub fn train_rbf_svm(
    x: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    gamma: f64,
    balanced: bool,
) -> Result<KernelModel> {
    if gamma <= 0.0 {
        return Err(Error::Config(format!(
            "rbf kernel width must be positive, got {gamma}"
        )));
    }
    let (y, c) = prepare(x, labels, lambda, balanced)?;
    let gram = Gram::build(x, |a, b| rbf_kernel(a, b, gamma));
    let (alpha, bias) = smo(&gram, &y, &c);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for ((a, yi), row) in alpha.iter().zip(&y).zip(x) {
        if *a > 0.0 {
            support_vectors.push(row.clone());
            dual_coefs.push(a * yi);
        }
    }
    Ok(KernelModel {
        support_vectors,
        dual_coefs,
        bias,
        gamma,
        lambda,
        platt: None,
    })
}

/// Margins for calibration: out-of-sample from a deterministic internal
/// 3-fold refit, falling back to in-sample margins when a class is too
/// small to survive the internal split.
fn calibration_margins<M>(
    x: &[Vec<f64>],
    labels: &[u8],
    train: impl Fn(&[Vec<f64>], &[u8]) -> Result<M>,
    margin_of: impl Fn(&M, &[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos < 3 || n_neg < 3 {
        let model = train(x, labels)?;
        return x.iter().map(|row| margin_of(&model, row)).collect();
    }

    // Fold = rank within the class modulo 3, so every internal training
    // subset keeps both classes.
    let mut fold = vec![0usize; labels.len()];
    let mut rank = [0usize; 2];
    for (i, &y) in labels.iter().enumerate() {
        let class = y as usize;
        fold[i] = rank[class] % 3;
        rank[class] += 1;
    }

    let mut margins = vec![0.0; labels.len()];
    for f in 0..3 {
        let train_idx: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
        let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let y_train: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
        let model = train(&x_train, &y_train)?;
        for i in (0..labels.len()).filter(|&i| fold[i] == f) {
            margins[i] = margin_of(&model, &x[i])?;
        }
    }
    Ok(margins)
}

/// Linear SVM with Platt calibration fitted on out-of-sample margins.
pub fn train_calibrated_linear_svm(
    x: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    balanced: bool,
) -> Result<LinearModel> {
    let mut model = train_linear_svm(x, labels, lambda, balanced)?;
    let margins = calibration_margins(
        x,
        labels,
        |xs, ys| train_linear_svm(xs, ys, lambda, balanced),
        |m, row| m.margin(row),
    )?;
    model.platt = Some(fit_platt(&margins, labels)?);
    Ok(model)
}

/// RBF SVM with Platt calibration fitted on out-of-sample decision values.
pub fn train_calibrated_rbf_svm(
    x: &[Vec<f64>],
    labels: &[u8],
    lambda: f64,
    gamma: f64,
    balanced: bool,
) -> Result<KernelModel> {
    let mut model = train_rbf_svm(x, labels, lambda, gamma, balanced)?;
    let margins = calibration_margins(
        x,
        labels,
        |xs, ys| train_rbf_svm(xs, ys, lambda, gamma, balanced),
        |m, row| m.decision(row),
    )?;
    model.platt = Some(fit_platt(&margins, labels)?);
    Ok(model)
}
