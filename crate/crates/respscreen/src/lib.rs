//! Respiratory illness screening from crowdsourced audio and symptom reports.
//!
//! The pipeline stages, in dependency order:
//!
//! 1. [`dataset`]: manifest parsing, eligibility filtering, stratified
//!    dev/test splitting and cross-validation folds.
//! 2. [`audio`]: WAV decoding, resampling to the canonical rate,
//!    amplitude normalization and silence trimming.
//! 3. [`lld`]: frame-level low-level descriptor extraction (energy,
//!    spectral, voicing contours plus first-order deltas).
//! 4. [`functionals`]: statistical functionals that reduce each contour
//!    to a fixed-length recording-level feature vector.
//! 5. [`classifiers`]: logistic regression, linear and RBF-kernel SVMs,
//!    and a decision tree, with standardization, class weighting,
//!    probability calibration and grid-search cross-validation.
//! 6. [`eval`]: ROC analysis, operating-point metrics, score fusion,
//!    cross-correlation and feature-group ablation.
//!
//! The [`commands`] module wires the stages into the operations exposed
//! by the `respscreen` binary; the crate examples drive the same entry
//! points programmatically.

pub mod audio;
pub mod classifiers;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod featfile;
pub mod functionals;
pub mod lld;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
