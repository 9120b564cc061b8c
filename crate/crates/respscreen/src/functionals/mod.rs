//! Statistical functionals that reduce an LLD contour to fixed
//! recording-level statistics.
//!
//! Six groups, 54 values per contour: percentiles (9), temporal (16),
//! peaks (11), moments (5), regression (7) and linear prediction (6).
//! Every degenerate case (constant contour, no peaks, short contour)
//! maps to 0, never NaN. The full feature layout lives in [`layout`].

pub mod layout;

use crate::error::{Error, Result};
use crate::lld::LLDMatrix;

pub use layout::{FeatureVector, N_FUNCTIONALS};

fn empty_err(group: &str) -> Error {
    Error::Numeric {
        stage: "functionals".into(),
        reason: format!("{group} functionals require a non-empty contour"),
    }
}

/// Percentile by linear interpolation between closest ranks:
/// rank = q (n - 1), value = lerp between the surrounding order
/// statistics. `sorted` must be ascending.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Percentile group: Q1, Q2, Q3, the three inter-quartile ranges
/// (Q2-Q1, Q3-Q2, Q3-Q1), the 1% and 99% percentiles, and their range.
pub fn functionals_percentiles(contour: &[f64]) -> Result<[f64; 9]> {
    if contour.is_empty() {
        return Err(empty_err("percentile"));
    }
    let mut sorted = contour.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = percentile(&sorted, 0.25);
    let q2 = percentile(&sorted, 0.50);
    let q3 = percentile(&sorted, 0.75);
    let p01 = percentile(&sorted, 0.01);
    let p99 = percentile(&sorted, 0.99);
    Ok([q1, q2, q3, q2 - q1, q3 - q2, q3 - q1, p01, p99, p99 - p01])
}

/// Temporal group: positions of min/max (relative to contour length),
/// range, centroid, flatness, relative durations above 25/50/75/90% of
/// range, relative rising and positive-curvature durations, segment
/// length statistics at the 25%-of-range threshold, and the fraction
/// of non-zero frames.
pub fn functionals_temporal(contour: &[f64]) -> Result<[f64; 16]> {
    if contour.is_empty() {
        return Err(empty_err("temporal"));
    }
    let n = contour.len();
    let nf = n as f64;
    let rel = |i: usize| {
        if n == 1 {
            0.0
        } else {
            i as f64 / (n - 1) as f64
        }
    };

    let (mut imin, mut imax) = (0usize, 0usize);
    for (i, &v) in contour.iter().enumerate() {
        if v < contour[imin] {
            imin = i;
        }
        if v > contour[imax] {
            imax = i;
        }
    }
    let min = contour[imin];
    let max = contour[imax];
    let range = max - min;

    // Centroid of the min-shifted contour; a constant contour has no
    // mass anywhere, so its centroid defaults to the middle.
    let weight_sum: f64 = contour.iter().map(|&v| v - min).sum();
    let centroid = if weight_sum > 0.0 {
        contour
            .iter()
            .enumerate()
            .map(|(i, &v)| rel(i) * (v - min))
            .sum::<f64>()
            / weight_sum
    } else {
        0.5
    };

    // Flatness: geometric over arithmetic mean of magnitudes.
    let eps = 1e-12;
    let log_mean = contour.iter().map(|&v| (v.abs() + eps).ln()).sum::<f64>() / nf;
    let abs_mean = contour.iter().map(|&v| v.abs()).sum::<f64>() / nf;
    let flatness = log_mean.exp() / (abs_mean + eps);

    let above = |frac: f64| {
        let th = min + frac * range;
        contour.iter().filter(|&&v| v > th).count() as f64 / nf
    };

    let rising = if n < 2 {
        0.0
    } else {
        contour.windows(2).filter(|w| w[1] > w[0]).count() as f64 / (n - 1) as f64
    };
    let positive_curvature = if n < 3 {
        0.0
    } else {
        contour
            .windows(3)
            .filter(|w| w[2] - 2.0 * w[1] + w[0] > 0.0)
            .count() as f64
            / (n - 2) as f64
    };

    // Segments: maximal runs on one side of the 25%-of-range threshold,
    // lengths relative to the contour length.
    let th = min + 0.25 * range;
    let mut seg_lengths: Vec<f64> = Vec::new();
    let mut run_start = 0usize;
    for i in 1..=n {
        if i == n || (contour[i] > th) != (contour[run_start] > th) {
            seg_lengths.push((i - run_start) as f64 / nf);
            run_start = i;
        }
    }
    let seg_mean = seg_lengths.iter().sum::<f64>() / seg_lengths.len() as f64;
    let seg_max = seg_lengths.iter().copied().fold(f64::MIN, f64::max);
    let seg_min = seg_lengths.iter().copied().fold(f64::MAX, f64::min);
    let seg_var = seg_lengths
        .iter()
        .map(|&l| (l - seg_mean) * (l - seg_mean))
        .sum::<f64>()
        / seg_lengths.len() as f64;

    let nonzero = contour.iter().filter(|&&v| v != 0.0).count() as f64 / nf;

    Ok([
        rel(imin),
        rel(imax),
        range,
        centroid,
        flatness,
        above(0.25),
        above(0.50),
        above(0.75),
        above(0.90),
        rising,
        positive_curvature,
        seg_mean,
        seg_max,
        seg_min,
        seg_var.sqrt(),
        nonzero,
    ])
}

/// Local extrema with the plateau rule: a run of equal values flanked
/// by strictly lower (higher) neighbors is one peak (minimum) at the
/// plateau center. Boundary runs are never extrema.
fn find_extrema(contour: &[f64]) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let n = contour.len();
    let mut peaks = Vec::new();
    let mut minima = Vec::new();
    let mut start = 0usize;
    while start < n {
        let mut end = start;
        while end + 1 < n && contour[end + 1] == contour[start] {
            end += 1;
        }
        if start > 0 && end + 1 < n {
            let v = contour[start];
            let center = (start + end) / 2;
            if contour[start - 1] < v && contour[end + 1] < v {
                peaks.push((center, v));
            } else if contour[start - 1] > v && contour[end + 1] > v {
                minima.push((center, v));
            }
        }
        start = end + 1;
    }
    (peaks, minima)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Peak group: mean of peaks, mean of peaks minus contour mean,
/// mean/std of inter-peak distances (relative to length), amplitude
/// mean of peaks and of minima (relative to the contour range),
/// relative peak amplitude range, and mean/std of rising and falling
/// slopes between consecutive extrema (per frame).
pub fn functionals_peaks(contour: &[f64]) -> Result<[f64; 11]> {
    if contour.is_empty() {
        return Err(empty_err("peak"));
    }
    let n = contour.len() as f64;
    let (peaks, minima) = find_extrema(contour);
    if peaks.is_empty() {
        return Ok([0.0; 11]);
    }
    let contour_mean = contour.iter().sum::<f64>() / n;
    let peak_values: Vec<f64> = peaks.iter().map(|&(_, v)| v).collect();
    let peaks_mean = peak_values.iter().sum::<f64>() / peak_values.len() as f64;

    let distances: Vec<f64> = peaks.windows(2).map(|w| (w[1].0 - w[0].0) as f64 / n).collect();
    let (dist_mean, dist_std) = mean_std(&distances);

    let min = contour.iter().copied().fold(f64::MAX, f64::min);
    let max = contour.iter().copied().fold(f64::MIN, f64::max);
    let range = max - min;
    let relative = |v: f64| if range > 0.0 { (v - min) / range } else { 0.0 };
    let peak_amp_mean =
        peak_values.iter().map(|&v| relative(v)).sum::<f64>() / peak_values.len() as f64;
    let minima_amp_mean = if minima.is_empty() {
        0.0
    } else {
        minima.iter().map(|&(_, v)| relative(v)).sum::<f64>() / minima.len() as f64
    };
    let peak_max = peak_values.iter().copied().fold(f64::MIN, f64::max);
    let peak_min = peak_values.iter().copied().fold(f64::MAX, f64::min);
    let peak_amp_range = if range > 0.0 { (peak_max - peak_min) / range } else { 0.0 };

    // Slopes between consecutive extrema, in value per frame.
    let mut extrema: Vec<(usize, f64)> = peaks.iter().chain(&minima).copied().collect();
    extrema.sort_by_key(|&(i, _)| i);
    let mut rising = Vec::new();
    let mut falling = Vec::new();
    for w in extrema.windows(2) {
        let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0) as f64;
        if slope > 0.0 {
            rising.push(slope);
        } else if slope < 0.0 {
            falling.push(slope);
        }
    }
    let (rise_mean, rise_std) = mean_std(&rising);
    let (fall_mean, fall_std) = mean_std(&falling);

    Ok([
        peaks_mean,
        peaks_mean - contour_mean,
        dist_mean,
        dist_std,
        peak_amp_mean,
        minima_amp_mean,
        peak_amp_range,
        rise_mean,
        rise_std,
        fall_mean,
        fall_std,
    ])
}

/// Moment group: arithmetic mean, root quadratic mean, population
/// standard deviation, skewness and kurtosis (m4 / sigma^4). Skewness
/// and kurtosis default to 0 when the variance falls below 1e-12.
pub fn functionals_moments(contour: &[f64]) -> Result<[f64; 5]> {
    if contour.is_empty() {
        return Err(empty_err("moment"));
    }
    let n = contour.len() as f64;
    let mean = contour.iter().sum::<f64>() / n;
    let rq = (contour.iter().map(|&v| v * v).sum::<f64>() / n).sqrt();
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in contour {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skew, kurt) = if m2 < 1e-12 {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };
    Ok([mean, rq, m2.sqrt(), skew, kurt])
}

/// Regression group: least-squares line and parabola over the contour
/// with the abscissa normalized to [0, 1]; errors are mean squared
/// residuals. Contours shorter than 3 get the linear fit and zero
/// quadratic terms.
pub fn functionals_regression(contour: &[f64]) -> Result<[f64; 7]> {
    if contour.is_empty() {
        return Err(empty_err("regression"));
    }
    let n = contour.len();
    let nf = n as f64;
    if n == 1 {
        return Ok([0.0, contour[0], 0.0, 0.0, 0.0, 0.0, 0.0]);
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;

    // Linear fit by the normal equations on (t, y).
    let st: f64 = (0..n).map(t).sum();
    let stt: f64 = (0..n).map(|i| t(i) * t(i)).sum();
    let sy: f64 = contour.iter().sum();
    let sty: f64 = contour.iter().enumerate().map(|(i, &y)| t(i) * y).sum();
    let denom = nf * stt - st * st;
    let slope = (nf * sty - st * sy) / denom;
    let offset = (sy - slope * st) / nf;
    let lin_err = contour
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = y - (slope * t(i) + offset);
            r * r
        })
        .sum::<f64>()
        / nf;

    if n < 3 {
        return Ok([slope, offset, lin_err, 0.0, 0.0, 0.0, 0.0]);
    }

    // Quadratic fit a t^2 + b t + c via the 3x3 normal equations.
    let s3: f64 = (0..n).map(|i| t(i).powi(3)).sum();
    let s4: f64 = (0..n).map(|i| t(i).powi(4)).sum();
    let stty: f64 = contour
        .iter()
        .enumerate()
        .map(|(i, &y)| t(i) * t(i) * y)
        .sum();
    let sol = solve3(
        [[s4, s3, stt], [s3, stt, st], [stt, st, nf]],
        [stty, sty, sy],
    );
    let (a, b, c) = match sol {
        Some([a, b, c]) => (a, b, c),
        // Singular system (degenerate abscissa); fall back to the line.
        None => (0.0, slope, offset),
    };
    let quad_err = contour
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let x = t(i);
            let r = y - (a * x * x + b * x + c);
            r * r
        })
        .sum::<f64>()
        / nf;

    Ok([slope, offset, lin_err, a, b, c, quad_err])
}

/// Gaussian elimination with partial pivoting for the 3x3 systems of
/// the quadratic fit. Returns None when the matrix is singular.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Modulation group: order-5 linear prediction on the mean-removed
/// contour via the autocorrelation method. Returns the prediction
/// error power (LP gain) followed by coefficients 1 to 5 in the
/// positive-predictor convention. Contours of 5 or fewer samples
/// return all zeros.
pub fn functionals_modulation(contour: &[f64]) -> Result<[f64; 6]> {
    if contour.is_empty() {
        return Err(empty_err("modulation"));
    }
    if contour.len() <= 5 {
        return Ok([0.0; 6]);
    }
    let n = contour.len() as f64;
    let mean = contour.iter().sum::<f64>() / n;
    let centered: Vec<f64> = contour.iter().map(|&v| v - mean).collect();
    let r: Vec<f64> = crate::dsp::autocorrelation_direct(&centered, 5)
        .iter()
        .map(|&v| v / n)
        .collect();
    if r[0] <= 0.0 {
        return Ok([0.0; 6]);
    }
    let coeffs = crate::dsp::levinson_durbin(&r, 5);
    // Prediction error power: r0 - sum a_k r_k.
    let gain = r[0] - coeffs.iter().zip(&r[1..]).map(|(a, rk)| a * rk).sum::<f64>();
    Ok([gain.max(0.0), coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]])
}

/// All 54 functionals of one contour, in layout order (percentiles,
/// temporal, peaks, moments, regression, modulation).
pub fn all_functionals(contour: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(N_FUNCTIONALS);
    out.extend(functionals_percentiles(contour)?);
    out.extend(functionals_temporal(contour)?);
    out.extend(functionals_peaks(contour)?);
    out.extend(functionals_moments(contour)?);
    out.extend(functionals_regression(contour)?);
    out.extend(functionals_modulation(contour)?);
    debug_assert_eq!(out.len(), N_FUNCTIONALS);
    Ok(out)
}

/// Reduces an LLD matrix to the fixed feature vector: 54 functionals
/// for each of the 130 contours, then 54 more for the voiced-frames
/// subcontour of each of the 12 voicing contours (frames with F0 > 0).
/// A recording with no voiced frames gets zeros for those blocks.
pub fn assemble_feature_vector(matrix: &LLDMatrix) -> Result<FeatureVector> {
    let names = &matrix.descriptor_names;
    let f0_col = names
        .iter()
        .position(|n| n == "f0")
        .ok_or_else(|| Error::Numeric {
            stage: "functionals".into(),
            reason: "descriptor layout lacks an f0 column".into(),
        })?;
    let voiced: Vec<bool> = matrix.values.iter().map(|row| row[f0_col] > 0.0).collect();

    let mut values = Vec::with_capacity(layout::N_DIMENSIONS);
    for j in 0..matrix.n_descriptors() {
        values.extend(all_functionals(&matrix.column(j))?);
    }
    for &j in &layout::voicing_columns(names) {
        let sub: Vec<f64> = matrix
            .values
            .iter()
            .zip(&voiced)
            .filter(|(_, &v)| v)
            .map(|(row, _)| row[j])
            .collect();
        if sub.is_empty() {
            values.extend(std::iter::repeat_n(0.0, N_FUNCTIONALS));
        } else {
            values.extend(all_functionals(&sub)?);
        }
    }

    for (d, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric {
                stage: "functionals".into(),
                reason: format!("non-finite value in dimension {d} ({})", layout::dimension_name(d)),
            });
        }
    }

    Ok(FeatureVector {
        values,
        layout_id: layout::LAYOUT_ID.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn percentiles_of_constant_contour_all_equal_the_constant() {
        let p = functionals_percentiles(&[4.2; 17]).unwrap();
        for &v in &p[..3] {
            assert_eq!(v, 4.2);
        }
        for &v in &p[3..6] {
            assert_eq!(v, 0.0);
        }
        assert_eq!(p[6], 4.2);
        assert_eq!(p[7], 4.2);
        assert_eq!(p[8], 0.0);
    }

    #[test]
    fn median_of_1234_is_2_5_under_linear_interpolation() {
        let p = functionals_percentiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((p[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn percentile_range_of_0_to_99_is_97_02() {
        let contour: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let p = functionals_percentiles(&contour).unwrap();
        // rank(1%) = 0.99 -> 0.99; rank(99%) = 98.01 -> 98.01.
        assert!((p[6] - 0.99).abs() < 1e-12);
        assert!((p[7] - 98.01).abs() < 1e-12);
        assert!((p[8] - 97.02).abs() < 1e-12);
    }

    #[test]
    fn empty_contour_is_an_error() {
        assert!(functionals_percentiles(&[]).is_err());
        assert!(functionals_temporal(&[]).is_err());
        assert!(functionals_peaks(&[]).is_err());
        assert!(functionals_moments(&[]).is_err());
        assert!(functionals_regression(&[]).is_err());
        assert!(functionals_modulation(&[]).is_err());
    }

    #[test]
    fn ramp_duration_above_quarter_range_is_three_quarters() {
        let contour: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let t = functionals_temporal(&contour).unwrap();
        assert!((t[5] - 0.75).abs() <= 1.0 / 101.0, "updur_25 {}", t[5]);
        assert_eq!(t[9], 1.0, "strictly increasing contour must rise always");
        assert_eq!(t[0], 0.0, "min at the start");
        assert_eq!(t[1], 1.0, "max at the end");
    }

    #[test]
    fn all_zero_contour_has_zero_nonzero_fraction() {
        let t = functionals_temporal(&[0.0; 40]).unwrap();
        assert_eq!(t[15], 0.0);
        // Constant contour: centroid defaults to the middle.
        assert_eq!(t[3], 0.5);
    }

    #[test]
    fn peaks_of_simple_contour_are_enumerated_by_hand() {
        let p = functionals_peaks(&[0.0, 1.0, 0.0, 2.0, 0.0]).unwrap();
        assert!((p[0] - 1.5).abs() < 1e-12, "mean of peaks {}", p[0]);
        // Contour mean = 0.6, so peaks mean minus mean = 0.9.
        assert!((p[1] - 0.9).abs() < 1e-12);
        // One inter-peak distance: (3 - 1) / 5.
        assert!((p[2] - 0.4).abs() < 1e-12);
        assert_eq!(p[3], 0.0);
    }

    #[test]
    fn constant_contour_has_no_peaks_and_zero_peak_stats() {
        let p = functionals_peaks(&[3.0; 10]).unwrap();
        assert_eq!(p, [0.0; 11]);
    }

    #[test]
    fn plateau_counts_as_one_peak_at_its_center() {
        let p = functionals_peaks(&[0.0, 2.0, 2.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p[0], 2.0);
        assert_eq!(p[2], 0.0, "single peak has no inter-peak distance");
    }

    #[test]
    fn sine_peaks_are_equally_spaced() {
        let contour: Vec<f64> = (0..300)
            .map(|i| (2.0 * std::f64::consts::PI * 3.0 * i as f64 / 300.0).sin())
            .collect();
        let p = functionals_peaks(&contour).unwrap();
        assert!(p[3] < 1e-2, "inter-peak distance std {}", p[3]);
    }

    #[test]
    fn moments_of_123_match_hand_arithmetic() {
        let m = functionals_moments(&[1.0, 2.0, 3.0]).unwrap();
        assert!((m[0] - 2.0).abs() < 1e-12);
        assert!((m[2] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(m[3].abs() < 1e-12, "symmetric contour skewness {}", m[3]);
    }

    #[test]
    fn constant_contour_moments_use_degenerate_rule() {
        let m = functionals_moments(&[5.0; 8]).unwrap();
        assert_eq!(m[2], 0.0);
        assert_eq!(m[3], 0.0);
        assert_eq!(m[4], 0.0);
    }

    #[test]
    fn line_is_fit_exactly() {
        let contour: Vec<f64> = (0..50).map(|i| 2.0 * (i as f64 / 49.0) + 1.0).collect();
        let r = functionals_regression(&contour).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-9);
        assert!((r[1] - 1.0).abs() < 1e-9);
        assert!(r[2] < 1e-18);
    }

    #[test]
    fn parabola_is_fit_exactly_by_the_quadratic_and_not_the_line() {
        let contour: Vec<f64> = (0..50).map(|i| (i as f64 / 49.0).powi(2)).collect();
        let r = functionals_regression(&contour).unwrap();
        assert!(r[2] > 1e-6, "linear residual {}", r[2]);
        assert!((r[3] - 1.0).abs() < 1e-9, "quad a {}", r[3]);
        assert!(r[4].abs() < 1e-9);
        assert!(r[5].abs() < 1e-9);
        assert!(r[6] < 1e-18);
    }

    #[test]
    fn constant_contour_regression_is_flat() {
        let r = functionals_regression(&[7.0; 20]).unwrap();
        assert!(r[0].abs() < 1e-9);
        assert!((r[1] - 7.0).abs() < 1e-9);
    }

    #[test]
    fn short_contours_zero_the_quadratic_terms() {
        let r = functionals_regression(&[1.0, 3.0]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12);
        assert_eq!(&r[3..], &[0.0; 4]);
    }

    #[test]
    fn lp_of_constant_contour_is_zero() {
        let m = functionals_modulation(&[2.5; 100]).unwrap();
        assert_eq!(m, [0.0; 6]);
    }

    #[test]
    fn lp_recovers_ar1_coefficient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut x = 0.0f64;
        let contour: Vec<f64> = (0..4000)
            .map(|_| {
                x = 0.9 * x + rng.random_range(-1.0f64..1.0);
                x
            })
            .collect();
        let m = functionals_modulation(&contour).unwrap();
        assert!((m[1] - 0.9).abs() < 0.05, "lp_c1 {}", m[1]);
    }

    #[test]
    fn white_noise_lp_gain_approximates_variance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let contour: Vec<f64> = (0..5000).map(|_| rng.random_range(-1.0f64..1.0)).collect();
        let mean = contour.iter().sum::<f64>() / contour.len() as f64;
        let var = contour.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>()
            / contour.len() as f64;
        let m = functionals_modulation(&contour).unwrap();
        assert!((m[0] - var).abs() < 0.1 * var, "gain {} vs var {var}", m[0]);
    }

    #[test]
    fn reversal_covariance_and_invariance() {
        let contour: Vec<f64> = (0..60).map(|i| ((i * 37 + 5) % 61) as f64).collect();
        let rev: Vec<f64> = contour.iter().rev().copied().collect();
        let p1 = functionals_percentiles(&contour).unwrap();
        let p2 = functionals_percentiles(&rev).unwrap();
        assert_eq!(p1, p2);
        let m1 = functionals_moments(&contour).unwrap();
        let m2 = functionals_moments(&rev).unwrap();
        for (a, b) in m1.iter().zip(&m2) {
            assert!((a - b).abs() < 1e-9);
        }
        let t1 = functionals_temporal(&contour).unwrap();
        let t2 = functionals_temporal(&rev).unwrap();
        assert!((t1[1] - (1.0 - t2[1])).abs() < 1e-12, "pos_max covariance");
        assert!((t1[0] - (1.0 - t2[0])).abs() < 1e-12, "pos_min covariance");
    }

    #[test]
    fn permutation_leaves_percentiles_and_moments_unchanged() {
        let contour: Vec<f64> = (0..31).map(|i| ((i * 17 + 3) % 37) as f64).collect();
        let mut shuffled = contour.clone();
        shuffled.reverse();
        shuffled.swap(3, 20);
        shuffled.swap(7, 11);
        assert_eq!(
            functionals_percentiles(&contour).unwrap(),
            functionals_percentiles(&shuffled).unwrap()
        );
        let a = functionals_moments(&contour).unwrap();
        let b = functionals_moments(&shuffled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn adding_a_constant_shifts_location_and_preserves_dispersion() {
        let contour: Vec<f64> = (0..45).map(|i| ((i * 29 + 1) % 47) as f64 / 10.0).collect();
        let shifted: Vec<f64> = contour.iter().map(|&v| v + 3.0).collect();
        let p1 = functionals_percentiles(&contour).unwrap();
        let p2 = functionals_percentiles(&shifted).unwrap();
        for i in [0usize, 1, 2, 6, 7] {
            assert!((p2[i] - p1[i] - 3.0).abs() < 1e-9, "location {i}");
        }
        for i in [3usize, 4, 5, 8] {
            assert!((p2[i] - p1[i]).abs() < 1e-9, "dispersion {i}");
        }
        let m1 = functionals_moments(&contour).unwrap();
        let m2 = functionals_moments(&shifted).unwrap();
        assert!((m2[0] - m1[0] - 3.0).abs() < 1e-9);
        assert!((m2[2] - m1[2]).abs() < 1e-9);
        let l1 = functionals_modulation(&contour).unwrap();
        let l2 = functionals_modulation(&shifted).unwrap();
        assert!((l1[0] - l2[0]).abs() < 1e-9, "LP gain shift-invariant");
        let r1 = functionals_regression(&contour).unwrap();
        let r2 = functionals_regression(&shifted).unwrap();
        assert!((r2[1] - r1[1] - 3.0).abs() < 1e-9, "offset shifts");
        assert!((r2[0] - r1[0]).abs() < 1e-9, "slope unchanged");
    }

    #[test]
    fn assembled_vector_is_deterministic_and_full_length() {
        use crate::lld::{extract_lld_matrix, FrameConfig};
        let signal: Vec<f64> = (0..22050)
            .map(|n| {
                let t = n as f64 / 44100.0;
                (2.0 * std::f64::consts::PI * 170.0 * t).sin()
                    + 0.3 * (2.0 * std::f64::consts::PI * 340.0 * t).sin()
            })
            .collect();
        let m = extract_lld_matrix(&signal, 44100, &FrameConfig::default()).unwrap();
        let a = assemble_feature_vector(&m).unwrap();
        let b = assemble_feature_vector(&m).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), layout::N_DIMENSIONS);
        assert_eq!(a.layout_id, layout::LAYOUT_ID);
    }

    #[test]
    fn zero_column_produces_zero_percentile_and_moment_features() {
        use crate::lld::{extract_lld_matrix, FrameConfig};
        // A silent (all-zero) segment zeroes entire descriptor columns
        // such as F0; check its percentile and moment blocks.
        let signal = vec![0.0; 22050];
        let m = extract_lld_matrix(&signal, 44100, &FrameConfig::default()).unwrap();
        let v = assemble_feature_vector(&m).unwrap();
        let f0_col = m.descriptor_names.iter().position(|n| n == "f0").unwrap();
        assert!(m.column(f0_col).iter().all(|&x| x == 0.0));
        let base = f0_col * N_FUNCTIONALS;
        for i in 0..9 {
            assert_eq!(v.values[base + i], 0.0, "percentile {i}");
        }
        for i in 36..41 {
            assert_eq!(v.values[base + i], 0.0, "moment {}", i - 36);
        }
    }
}
