//! Global mean-variance standardization fitted on training data.

use crate::error::{Error, Result};

/// Per-dimension shift and scale. Scale is the population standard
/// deviation, with zero-variance dimensions pinned to 1 so they map to
/// zero instead of dividing by nothing.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Variance below this counts as a degenerate (constant) dimension.
const DEGENERATE_VARIANCE: f64 = 1e-24;

/// Fits mean and population standard deviation per dimension.
pub fn fit_standardizer(rows: &[Vec<f64>]) -> Result<Standardizer> {
    if rows.len() < 2 {
        return Err(Error::Dataset(format!(
            "standardizer needs at least 2 training rows, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Dataset(format!(
            "standardizer rows disagree on dimension: {} vs {dim}",
            bad.len()
        )));
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for row in rows {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = x - m;
            *v += d * d;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| {
            let v = v / n;
            if v <= DEGENERATE_VARIANCE {
                1.0
            } else {
                v.sqrt()
            }
        })
        .collect();
    Ok(Standardizer { mean, scale })
}

impl Standardizer {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Returns (x - mean) / scale.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Config(format!(
                "input dimension {} does not match standardizer dimension {}",
                x.len(),
                self.mean.len()
            )));
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    /// Standardizes a whole feature matrix.
    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column_maps_to_plus_minus_one() {
        let rows = vec![vec![1.0], vec![3.0]];
        let s = fit_standardizer(&rows).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.scale, vec![1.0]); // population std of {1,3}
        let out = s.apply_all(&rows).unwrap();
        assert_eq!(out, vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn constant_column_gets_unit_scale_and_zero_output() {
        let rows = vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]];
        let s = fit_standardizer(&rows).unwrap();
        assert_eq!(s.scale[0], 1.0);
        let out = s.apply_all(&rows).unwrap();
        for row in &out {
            assert_eq!(row[0], 0.0);
        }
    }

    #[test]
    fn transformed_training_set_has_zero_mean_unit_variance() {
        // Deterministic pseudo-random matrix with mixed magnitudes.
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                (0..6)
                    .map(|j| ((i * 37 + j * 101) % 97) as f64 * 0.37 - 15.0 + j as f64 * 100.0)
                    .collect()
            })
            .collect();
        let s = fit_standardizer(&rows).unwrap();
        let out = s.apply_all(&rows).unwrap();
        let n = out.len() as f64;
        for j in 0..6 {
            let mean: f64 = out.iter().map(|r| r[j]).sum::<f64>() / n;
            let var: f64 = out.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() <= 1e-8, "column {j} mean {mean}");
            assert!((var - 1.0).abs() <= 1e-6, "column {j} variance {var}");
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(fit_standardizer(&rows).is_err());
        let s = fit_standardizer(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(s.apply(&[1.0, 2.0]).is_err());
        assert!(fit_standardizer(&[vec![1.0]]).is_err());
    }
}
