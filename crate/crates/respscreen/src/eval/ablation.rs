//! Feature-subset ablation over descriptor categories.
//!
//! Each named group selects the feature dimensions whose contour
//! derives from one category of low-level descriptors (a delta or
//! voiced-only contour belongs to its base descriptor's category).
//! For every group the classifier is retrained twice with full
//! hyperparameter selection: once on the group's dimensions alone and
//! once on everything else, giving the two test-AUC columns.

use serde::{Deserialize, Serialize};

use crate::classifiers::cv::{cross_validate, default_grid, ModelFamily};
use crate::eval::{auc_from_scores, ScoredSet};
use crate::{Error, Result};

/// The ablation rows: one per descriptor category, plus the three
/// whole-group aggregates.
pub const ABLATION_GROUPS: [&str; 16] = [
    "rms_energy_zcr",
    "mod_audspec_sum",
    "loudness",
    "all_energy",
    "mod_audspec_bands",
    "mfcc",
    "flux_centroid_entropy_slope",
    "sharpness_harmonicity",
    "rolloff",
    "spectral_moments",
    "band_energies",
    "all_spectral",
    "f0",
    "hnr_jitter_shimmer",
    "voicing_prob",
    "all_voicing",
];

/// Strips the voiced-variant and delta prefixes off a contour label,
/// leaving the base descriptor name.
pub fn contour_base(label: &str) -> &str {
    let label = label.strip_prefix("voiced_").unwrap_or(label);
    label.strip_prefix("de_").unwrap_or(label)
}

/// Category of one base descriptor, or None for names outside the
/// descriptor set.
fn base_category(base: &str) -> Option<&'static str> {
    Some(match base {
        "rms_energy" | "zcr" => "rms_energy_zcr",
        "mod_audspec_sum" => "mod_audspec_sum",
        "loudness" => "loudness",
        "spectral_flux" | "spectral_centroid" | "spectral_entropy" | "spectral_slope" => {
            "flux_centroid_entropy_slope"
        }
        "sharpness" | "harmonicity" => "sharpness_harmonicity",
        "spectral_variance" | "spectral_skewness" | "spectral_kurtosis" => "spectral_moments",
        "band_energy_250_650" | "band_energy_1000_4000" => "band_energies",
        "f0" => "f0",
        "voicing_prob" => "voicing_prob",
        "log_hnr" | "jitter_local" | "jitter_delta" | "shimmer_local" => "hnr_jitter_shimmer",
        _ if base.starts_with("mod_audspec_band_") => "mod_audspec_bands",
        _ if base.starts_with("mfcc_") => "mfcc",
        _ if base.starts_with("rolloff_") => "rolloff",
        _ => return None,
    })
}

/// Categories an ablation group covers.
fn group_members(group: &str) -> Option<&'static [&'static str]> {
    match group {
        "all_energy" => Some(&["rms_energy_zcr", "mod_audspec_sum", "loudness"]),
        "all_spectral" => Some(&[
            "mod_audspec_bands",
            "mfcc",
            "flux_centroid_entropy_slope",
            "sharpness_harmonicity",
            "rolloff",
            "spectral_moments",
            "band_energies",
        ]),
        "all_voicing" => Some(&["f0", "hnr_jitter_shimmer", "voicing_prob"]),
        "rms_energy_zcr" => Some(&["rms_energy_zcr"]),
        "mod_audspec_sum" => Some(&["mod_audspec_sum"]),
        "loudness" => Some(&["loudness"]),
        "mod_audspec_bands" => Some(&["mod_audspec_bands"]),
        "mfcc" => Some(&["mfcc"]),
        "flux_centroid_entropy_slope" => Some(&["flux_centroid_entropy_slope"]),
        "sharpness_harmonicity" => Some(&["sharpness_harmonicity"]),
        "rolloff" => Some(&["rolloff"]),
        "spectral_moments" => Some(&["spectral_moments"]),
        "band_energies" => Some(&["band_energies"]),
        "f0" => Some(&["f0"]),
        "hnr_jitter_shimmer" => Some(&["hnr_jitter_shimmer"]),
        "voicing_prob" => Some(&["voicing_prob"]),
        _ => None,
    }
}

/// Dimension indices a group selects under the given layout: contour
/// `i` owns dimensions `i * n_functionals .. (i + 1) * n_functionals`.
/// The name `all` selects everything.
pub fn group_dimensions(
    group: &str,
    contour_labels: &[String],
    n_functionals: usize,
) -> Result<Vec<usize>> {
    let n_dims = contour_labels.len() * n_functionals;
    if group == "all" {
        return Ok((0..n_dims).collect());
    }
    let members = group_members(group)
        .ok_or_else(|| Error::Config(format!("unknown ablation group {group}")))?;
    let mut dims = Vec::new();
    for (i, label) in contour_labels.iter().enumerate() {
        let category = match base_category(contour_base(label)) {
            Some(c) => c,
            None => continue,
        };
        if members.contains(&category) {
            dims.extend(i * n_functionals..(i + 1) * n_functionals);
        }
    }
    if dims.is_empty() {
        return Err(Error::Dataset(format!(
            "ablation group {group} selects no dimensions in this layout"
        )));
    }
    Ok(dims)
}

/// Dimensions outside the mask, ascending.
pub fn complement(mask: &[usize], n_dims: usize) -> Vec<usize> {
    let mut in_mask = vec![false; n_dims];
    for &d in mask {
        in_mask[d] = true;
    }
    (0..n_dims).filter(|&d| !in_mask[d]).collect()
}

/// Test AUC with only the group's dimensions (fset) and with
/// everything except them (rest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub group: String,
    pub fset_dims: usize,
    pub fset_auc: f64,
    pub rest_auc: f64,
}

/// Runs the ablation table for one modality. Development folds drive
/// hyperparameter selection per cell; the RBF kernel-width grid is
/// re-derived from each projected feature set.
#[allow(clippy::too_many_arguments)]
pub fn ablation(
    family: ModelFamily,
    dev_features: &[Vec<f64>],
    dev_labels: &[u8],
    folds: &[Vec<usize>],
    test_features: &[Vec<f64>],
    test_labels: &[u8],
    contour_labels: &[String],
    n_functionals: usize,
    groups: &[String],
    balanced: bool,
) -> Result<Vec<AblationRow>> {
    let n_dims = contour_labels.len() * n_functionals;
    for row in dev_features.iter().chain(test_features) {
        if row.len() != n_dims {
            return Err(Error::Config(format!(
                "feature row has {} dimensions, layout defines {n_dims}",
                row.len()
            )));
        }
    }
    let mut rows = Vec::with_capacity(groups.len());
    for group in groups {
        let mask = group_dimensions(group, contour_labels, n_functionals)?;
        let rest = complement(&mask, n_dims);
        let fset_auc = masked_auc(
            family,
            dev_features,
            dev_labels,
            folds,
            test_features,
            test_labels,
            &mask,
            balanced,
        )?;
        // A mask covering every dimension leaves nothing to exclude;
        // both columns then report the full-feature result.
        let rest_auc = if rest.is_empty() {
            fset_auc
        } else {
            masked_auc(
                family,
                dev_features,
                dev_labels,
                folds,
                test_features,
                test_labels,
                &rest,
                balanced,
            )?
        };
        rows.push(AblationRow {
            group: group.clone(),
            fset_dims: mask.len(),
            fset_auc,
            rest_auc,
        });
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn masked_auc(
    family: ModelFamily,
    dev_features: &[Vec<f64>],
    dev_labels: &[u8],
    folds: &[Vec<usize>],
    test_features: &[Vec<f64>],
    test_labels: &[u8],
    dims: &[usize],
    balanced: bool,
) -> Result<f64> {
    let dev = project(dev_features, dims);
    let test = project(test_features, dims);
    let grid = default_grid(family, &dev)?;
    let (_, fitted) = cross_validate(&dev, dev_labels, folds, family, &grid, balanced)?;
    let scores: Vec<f64> = test
        .iter()
        .map(|x| fitted.predict(x))
        .collect::<Result<_>>()?;
    let ids = (0..test.len()).map(|i| format!("t{i}")).collect();
    auc_from_scores(&ScoredSet::new("ablation", ids, scores, test_labels.to_vec())?)
}

fn project(rows: &[Vec<f64>], dims: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| dims.iter().map(|&d| r[d]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::layout;

    #[test]
    fn masks_partition_the_frozen_layout() {
        let labels = layout::contour_labels();
        let nf = layout::N_FUNCTIONALS;
        let n_dims = layout::N_DIMENSIONS;
        for group in ABLATION_GROUPS {
            let mask = group_dimensions(group, &labels, nf).unwrap();
            assert!(!mask.is_empty(), "{group}");
            assert!(mask.windows(2).all(|w| w[0] < w[1]), "{group} sorted");
            let rest = complement(&mask, n_dims);
            assert_eq!(mask.len() + rest.len(), n_dims);
        }
        // The three aggregates partition the space exactly.
        let energy = group_dimensions("all_energy", &labels, nf).unwrap();
        let spectral = group_dimensions("all_spectral", &labels, nf).unwrap();
        let voicing = group_dimensions("all_voicing", &labels, nf).unwrap();
        assert_eq!(energy.len(), 8 * nf);
        assert_eq!(spectral.len(), 110 * nf);
        assert_eq!(voicing.len(), 24 * nf);
        let mut union: Vec<usize> = energy.into_iter().chain(spectral).chain(voicing).collect();
        union.sort_unstable();
        assert_eq!(union, (0..n_dims).collect::<Vec<_>>());
        // Spot sizes: 14 cepstral contours and 4 roll-off contours,
        // each doubled by deltas.
        assert_eq!(
            group_dimensions("mfcc", &labels, nf).unwrap().len(),
            28 * nf
        );
        assert_eq!(
            group_dimensions("rolloff", &labels, nf).unwrap().len(),
            8 * nf
        );
        // Voicing categories further double through voiced-only
        // contours.
        assert_eq!(group_dimensions("f0", &labels, nf).unwrap().len(), 4 * nf);
    }

    #[test]
    fn unknown_group_and_empty_mask_are_rejected() {
        let labels = layout::contour_labels();
        assert!(group_dimensions("bogus", &labels, 54).is_err());
        let toy: Vec<String> = vec!["rms_energy".into(), "de_rms_energy".into()];
        assert!(group_dimensions("f0", &toy, 2).is_err());
    }

    /// A two-contour toy layout where the first contour carries the
    /// class signal and the second is noise.
    fn toy_problem() -> (Vec<String>, Vec<Vec<f64>>, Vec<u8>, Vec<Vec<f64>>, Vec<u8>) {
        let labels: Vec<String> = vec!["rms_energy".into(), "f0".into()];
        let make = |n: usize, offset: usize| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for i in 0..n {
                let label = (i % 2) as u8;
                let signal = if label == 1 { 1.5 } else { -1.5 };
                let noise = (((i + offset) * 37 % 17) as f64 - 8.0) / 8.0;
                x.push(vec![
                    signal + 0.05 * noise,
                    signal * 0.8,
                    noise,
                    -0.5 * noise,
                ]);
                y.push(label);
            }
            (x, y)
        };
        let (dev_x, dev_y) = make(24, 0);
        let (test_x, test_y) = make(16, 5);
        (labels, dev_x, dev_y, test_x, test_y)
    }

    #[test]
    fn informative_contour_dominates_its_complement() {
        let (labels, dev_x, dev_y, test_x, test_y) = toy_problem();
        let folds: Vec<Vec<usize>> = (0..2).map(|f| (12 * f..12 * (f + 1)).collect()).collect();
        let groups = vec!["rms_energy_zcr".to_string(), "f0".to_string()];
        let rows = ablation(
            ModelFamily::Logistic,
            &dev_x,
            &dev_y,
            &folds,
            &test_x,
            &test_y,
            &labels,
            2,
            &groups,
            true,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].fset_dims, 2);
        assert!(rows[0].fset_auc > 0.95, "signal contour {}", rows[0].fset_auc);
        assert!(rows[1].fset_auc < 0.8, "noise contour {}", rows[1].fset_auc);
        assert!(rows[1].rest_auc > 0.95);
    }

    #[test]
    fn degenerate_full_mask_reports_equal_columns() {
        let (labels, dev_x, dev_y, test_x, test_y) = toy_problem();
        let folds: Vec<Vec<usize>> = (0..2).map(|f| (12 * f..12 * (f + 1)).collect()).collect();
        let rows = ablation(
            ModelFamily::Logistic,
            &dev_x,
            &dev_y,
            &folds,
            &test_x,
            &test_y,
            &labels,
            2,
            &["all".to_string()],
            true,
        )
        .unwrap();
        assert_eq!(rows[0].fset_dims, 4);
        assert_eq!(rows[0].fset_auc, rows[0].rest_auc);
    }
}
