//! Classical classifiers over the acoustic and symptom features.
//!
//! Four model families, all emitting a COVID-class probability in
//! [0, 1]: logistic regression, a linear support vector machine and an
//! RBF-kernel support vector machine (both Platt-calibrated), and a
//! Gini-criterion decision tree over the binary symptom bits. Training
//! is deterministic given the data and hyperparameters: the optimizers
//! are full-batch and tie-breaks are fixed, so repeated runs produce
//! identical models.

pub mod cv;
pub mod logistic;
pub mod model_io;
pub mod platt;
pub mod standardize;
pub mod svm;
pub mod tree;

use crate::error::{Error, Result};

pub use cv::{cross_validate, default_grid, CvReport, GridPoint, ModelFamily};
pub use logistic::train_logistic;
pub use model_io::{load_model, save_model, SavedModel};
pub use platt::PlattCalibrator;
pub use standardize::{fit_standardizer, Standardizer};
pub use svm::{train_linear_svm, train_rbf_svm, KernelModel};
pub use tree::{train_tree, TreeModel, TreeNode};

/// Model families a saved model can declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    LinearSvm,
    RbfSvm,
    SymptomTree,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::RbfSvm => "rbf_svm",
            ModelKind::SymptomTree => "symptom_tree",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weight vector, bias and regularization of a linear decision function.
/// Serves both the logistic model (sigmoid of the margin) and the
/// linear SVM (Platt-calibrated margin).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    /// Present on SVM models after calibration.
    pub platt: Option<PlattCalibrator>,
}

impl LinearModel {
    /// Raw margin w'x + b.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Config(format!(
                "input dimension {} does not match model dimension {}",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    /// COVID-class probability for one standardized input.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let margin = self.margin(x)?;
        match (self.kind, &self.platt) {
            (ModelKind::Logistic, _) => Ok(sigmoid(margin)),
            (_, Some(platt)) => Ok(platt.probability(margin)),
            (kind, None) => Err(Error::Config(format!(
                "{kind} model has no calibrator; cannot emit a probability"
            ))),
        }
    }
}

/// Numerically safe logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow for large |z|.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-sample weights for the balanced loss: positives carry
/// N_neg/N_pos so both classes contribute equal total weight.
///
/// Labels must contain both classes.
pub fn balanced_weights(labels: &[u8]) -> Result<Vec<f64>> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Dataset(
            "training labels contain a single class".into(),
        ));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Dataset("labels must be 0 or 1".into()));
    }
    let pos_weight = n_neg as f64 / n_pos as f64;
    Ok(labels
        .iter()
        .map(|&y| if y == 1 { pos_weight } else { 1.0 })
        .collect())
}

/// Uniform weights with the same validation as [`balanced_weights`].
pub fn uniform_weights(labels: &[u8]) -> Result<Vec<f64>> {
    balanced_weights(labels)?;
    Ok(vec![1.0; labels.len()])
}
