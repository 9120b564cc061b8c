//! Sigmoid calibration of SVM margins.

use crate::error::{Error, Result};

/// Maps a margin m to P(COVID) = 1/(1 + exp(a*m + b)). After fitting on
/// data where larger margins mean more positive, `a` is negative, so
/// the probability rises with the margin.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlattCalibrator {
    pub a: f64,
    pub b: f64,
}

impl PlattCalibrator {
    pub fn probability(&self, margin: f64) -> f64 {
        let z = self.a * margin + self.b;
        // 1/(1+exp(z)) computed on the stable side.
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Fits (a, b) by regularized maximum likelihood: Newton iterations
/// with a backtracking line search on the cross-entropy against
/// smoothed target probabilities. The smoothing keeps the optimum
/// finite even for perfectly separated margins.
pub fn fit_platt(margins: &[f64], labels: &[u8]) -> Result<PlattCalibrator> {
    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const RIDGE: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    if margins.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} margins for {} labels",
            margins.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::Dataset(
            "calibration needs margins from both classes".into(),
        ));
    }

    let hi_target = (n_pos + 1.0) / (n_pos + 2.0);
    let lo_target = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&y| if y == 1 { hi_target } else { lo_target })
        .collect();

    let objective = |a: f64, b: f64| -> f64 {
        margins
            .iter()
            .zip(&targets)
            .map(|(&m, &t)| {
                let z = a * m + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut value = objective(a, b);

    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (RIDGE, RIDGE, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&m, &t) in margins.iter().zip(&targets) {
            let z = a * m + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += m * m * d2;
            h22 += d2;
            h21 += m * d2;
            let d1 = t - p;
            g1 += m * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }

        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nv = objective(na, nb);
            if nv < value + 1e-4 * step * gd {
                a = na;
                b = nb;
                value = nv;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }

    Ok(PlattCalibrator { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_margins_fit_a_rising_sigmoid() {
        let margins = [-2.0, -1.5, -1.0, 1.0, 1.5, 2.0];
        let labels = [0u8, 0, 0, 1, 1, 1];
        let cal = fit_platt(&margins, &labels).unwrap();
        assert!(cal.a < 0.0, "a = {}", cal.a);
        assert!(cal.probability(2.0) > 0.8);
        assert!(cal.probability(-2.0) < 0.2);
    }

    #[test]
    fn output_is_strictly_monotone_in_the_margin() {
        let margins = [-1.0, -0.2, 0.1, 0.4, 1.2, 2.0];
        let labels = [0u8, 0, 1, 0, 1, 1];
        let cal = fit_platt(&margins, &labels).unwrap();
        let mut last = 0.0;
        for k in -10..=10 {
            let p = cal.probability(k as f64 * 0.5);
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn noisy_overlapping_margins_still_fit_finite_parameters() {
        let margins: Vec<f64> = (0..40).map(|i| ((i * 13) % 17) as f64 * 0.2 - 1.6).collect();
        let labels: Vec<u8> = margins.iter().map(|&m| (m + 0.3 > 0.0) as u8).collect();
        let cal = fit_platt(&margins, &labels).unwrap();
        assert!(cal.a.is_finite() && cal.b.is_finite());
        for p in margins.iter().map(|&m| cal.probability(m)) {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn single_class_margins_are_rejected() {
        assert!(fit_platt(&[0.1, 0.5], &[1, 1]).is_err());
    }
}
