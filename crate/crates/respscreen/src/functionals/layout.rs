//! The frozen feature-vector layout.
//!
//! 130 contours x 54 functionals, plus voiced-frames-only variants of
//! the 12 voicing contours (6 base + 6 delta): (130 + 12) x 54 = 7668
//! dimensions. The layout identifier names this exact map; any change
//! to contour order, functional order or the voiced-variant rule must
//! bump it.

use serde::{Deserialize, Serialize};

use crate::lld;

/// Identifier of the layout frozen in this module.
pub const LAYOUT_ID: &str = "llf-v1-7668";

/// Functionals per contour.
pub const N_FUNCTIONALS: usize = 54;

/// Voicing descriptors that additionally get voiced-only statistics.
pub const VOICING_LLDS: [&str; 6] = [
    "f0",
    "voicing_prob",
    "log_hnr",
    "jitter_local",
    "jitter_delta",
    "shimmer_local",
];

/// Total feature dimensions under [`LAYOUT_ID`].
pub const N_DIMENSIONS: usize = (lld::N_LLDS + 2 * VOICING_LLDS.len()) * N_FUNCTIONALS;

/// Names of the 54 functionals, in the order `all_functionals` emits.
pub const FUNCTIONAL_NAMES: [&str; N_FUNCTIONALS] = [
    // Percentiles.
    "quartile_1",
    "quartile_2",
    "quartile_3",
    "iqr_2_1",
    "iqr_3_2",
    "iqr_3_1",
    "percentile_1",
    "percentile_99",
    "range_1_99",
    // Temporal.
    "pos_min",
    "pos_max",
    "range",
    "centroid",
    "flatness",
    "updur_25",
    "updur_50",
    "updur_75",
    "updur_90",
    "rising_dur",
    "pos_curv_dur",
    "seg_len_mean",
    "seg_len_max",
    "seg_len_min",
    "seg_len_std",
    "nonzero_frac",
    // Peaks.
    "peaks_mean",
    "peaks_mean_rel",
    "peak_dist_mean",
    "peak_dist_std",
    "peaks_amp_mean",
    "minima_amp_mean",
    "peaks_amp_range",
    "rise_slope_mean",
    "rise_slope_std",
    "fall_slope_mean",
    "fall_slope_std",
    // Moments.
    "mean",
    "rqmean",
    "stddev",
    "skewness",
    "kurtosis",
    // Regression.
    "lin_slope",
    "lin_offset",
    "lin_err",
    "quad_a",
    "quad_b",
    "quad_offset",
    "quad_err",
    // Modulation.
    "lp_gain",
    "lp_c1",
    "lp_c2",
    "lp_c3",
    "lp_c4",
    "lp_c5",
];

/// A recording-level feature vector under one layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout_id: String,
}

/// Column indices of the voiced-variant contours (the 6 voicing LLDs
/// and their deltas), in layout order.
pub fn voicing_columns(descriptor_names: &[String]) -> Vec<usize> {
    let mut cols = Vec::with_capacity(2 * VOICING_LLDS.len());
    for name in VOICING_LLDS {
        cols.push(
            descriptor_names
                .iter()
                .position(|n| n == name)
                .expect("voicing descriptor missing from layout"),
        );
    }
    for name in VOICING_LLDS {
        let delta = format!("de_{name}");
        cols.push(
            descriptor_names
                .iter()
                .position(|n| *n == delta)
                .expect("voicing delta descriptor missing from layout"),
        );
    }
    cols
}

/// Contour label for each block of 54 dimensions, in layout order:
/// the 130 descriptors, then `voiced_`-prefixed voicing contours.
pub fn contour_labels() -> Vec<String> {
    let mut labels = lld::descriptor_names();
    for name in VOICING_LLDS {
        labels.push(format!("voiced_{name}"));
    }
    for name in VOICING_LLDS {
        labels.push(format!("voiced_de_{name}"));
    }
    labels
}

/// Name of feature dimension `d`: `<contour>__<functional>`.
pub fn dimension_name(d: usize) -> String {
    let labels = contour_labels();
    let contour = &labels[d / N_FUNCTIONALS];
    let functional = FUNCTIONAL_NAMES[d % N_FUNCTIONALS];
    format!("{contour}__{functional}")
}

/// All dimension names in order. The result has [`N_DIMENSIONS`] entries.
pub fn dimension_names() -> Vec<String> {
    let labels = contour_labels();
    let mut names = Vec::with_capacity(N_DIMENSIONS);
    for contour in &labels {
        for functional in FUNCTIONAL_NAMES {
            names.push(format!("{contour}__{functional}"));
        }
    }
    names
}

/// The layout map as delimiter-separated text: one row per dimension
/// with its index, contour and functional. The header records the
/// layout identifier and total length.
pub fn layout_map_csv() -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# layout_id={LAYOUT_ID} dimensions={N_DIMENSIONS}\n"
    ));
    out.push_str("dimension,contour,functional\n");
    let labels = contour_labels();
    let mut d = 0;
    for contour in &labels {
        for functional in FUNCTIONAL_NAMES {
            out.push_str(&format!("{d},{contour},{functional}\n"));
            d += 1;
        }
    }
    out
}
