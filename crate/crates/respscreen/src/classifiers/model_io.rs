//! Versioned model files.
//!
//! A model file is structured text: the saved model plus a checksum of
//! its canonical serialization. Loading verifies magic, format version,
//! checksum and the consistency between the declared kind and the
//! stored parameters. Parameters round-trip bit-exactly, so a reloaded
//! model predicts identically to the one saved.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cv::{FittedModel, GridPoint};
use super::svm::KernelModel;
use super::tree::TreeModel;
use super::{LinearModel, ModelKind, Standardizer};
use crate::{Error, Result};

/// Identifies a model file regardless of extension.
pub const MODEL_MAGIC: &str = "respscreen-model";

/// Bumped on any incompatible change to the file contents.
pub const MODEL_FORMAT_VERSION: u16 = 1;

/// The learned parameters of any model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParameters {
    Linear(LinearModel),
    Kernel(KernelModel),
    Tree(TreeModel),
}

impl ModelParameters {
    /// The kind these parameters implement. Linear parameters carry
    /// their own tag because they serve two families.
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParameters::Linear(m) => m.kind,
            ModelParameters::Kernel(_) => ModelKind::RbfSvm,
            ModelParameters::Tree(_) => ModelKind::SymptomTree,
        }
    }

    /// Probability for one feature row, already standardized when the
    /// model calls for it.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            ModelParameters::Linear(m) => m.predict(x),
            ModelParameters::Kernel(m) => m.predict(x),
            ModelParameters::Tree(m) => m.predict(x),
        }
    }
}

/// Everything needed to reproduce a trained model's predictions, plus
/// the provenance needed to guard against misuse: the feature layout it
/// was trained under and the ids of its training participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub magic: String,
    pub format_version: u16,
    pub kind: ModelKind,
    pub layout_id: String,
    pub hyperparameters: GridPoint,
    pub standardizer: Option<Standardizer>,
    pub parameters: ModelParameters,
    pub train_ids: Vec<String>,
}

impl SavedModel {
    pub fn from_fitted(
        fitted: FittedModel,
        layout_id: impl Into<String>,
        train_ids: Vec<String>,
    ) -> Self {
        SavedModel {
            magic: MODEL_MAGIC.to_string(),
            format_version: MODEL_FORMAT_VERSION,
            kind: fitted.kind,
            layout_id: layout_id.into(),
            hyperparameters: fitted.point,
            standardizer: fitted.standardizer,
            parameters: fitted.parameters,
            train_ids,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match &self.standardizer {
            Some(s) => self.parameters.predict(&s.apply(x)?),
            None => self.parameters.predict(x),
        }
    }

    /// Rejects features produced under a different layout.
    pub fn check_layout(&self, expected: &str) -> Result<()> {
        if self.layout_id != expected {
            return Err(Error::Config(format!(
                "model was trained under feature layout {} but the features use {expected}",
                self.layout_id
            )));
        }
        Ok(())
    }
}

/// On-disk wrapper: the model and a hex SHA-256 digest of its
/// canonical serialization.
#[derive(Serialize, Deserialize)]
struct ModelFileBody {
    model: SavedModel,
    checksum: String,
}

fn canonical_checksum(model: &SavedModel) -> Result<String> {
    let bytes = serde_json::to_vec(model)
        .map_err(|e| Error::Other(format!("model serialization failed: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<()> {
    let body = ModelFileBody {
        checksum: canonical_checksum(model)?,
        model: model.clone(),
    };
    let mut text = serde_json::to_string_pretty(&body)
        .map_err(|e| Error::Other(format!("model serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fail = |reason: String| Error::ModelFile {
        path: path.to_path_buf(),
        reason,
    };
    let body: ModelFileBody =
        serde_json::from_str(&text).map_err(|e| fail(format!("unparseable: {e}")))?;
    if body.model.magic != MODEL_MAGIC {
        return Err(fail(format!("wrong magic {:?}", body.model.magic)));
    }
    if body.model.format_version != MODEL_FORMAT_VERSION {
        return Err(fail(format!(
            "format version {} is not the supported {MODEL_FORMAT_VERSION}",
            body.model.format_version
        )));
    }
    let expected = canonical_checksum(&body.model)?;
    if body.checksum != expected {
        return Err(fail("checksum mismatch, file is corrupt".into()));
    }
    if body.model.parameters.kind() != body.model.kind {
        return Err(fail(format!(
            "declared kind {} does not match the stored {} parameters",
            body.model.kind,
            body.model.parameters.kind()
        )));
    }
    Ok(body.model)
}

#[cfg(test)]
mod tests {
    use super::super::cv::{cross_validate, GridPoint, ModelFamily};
    use super::*;
    use tempfile::tempdir;

    fn trained_model() -> SavedModel {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let label = (i % 2) as u8;
            let center = if label == 1 { 1.5 } else { -1.5 };
            x.push(vec![center + i as f64 * 0.01, 0.3 * center]);
            y.push(label);
        }
        let folds = vec![(0..10).collect::<Vec<_>>(), (10..20).collect::<Vec<_>>()];
        let grid = [GridPoint {
            lambda: 0.1,
            gamma: None,
            min_samples_leaf: None,
        }];
        let (_, fitted) =
            cross_validate(&x, &y, &folds, ModelFamily::Logistic, &grid, true).unwrap();
        SavedModel::from_fitted(
            fitted,
            "llf-v1-7668",
            (0..20).map(|i| format!("p{i}")).collect(),
        )
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = trained_model();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        for x in [[0.4, -0.2], [1.6, 0.5], [-1.4, -0.5]] {
            let a = model.predict(&x).unwrap();
            let b = loaded.predict(&x).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut model = trained_model();
        model.magic = "bogus".into();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn future_format_version_is_rejected() {
        let mut model = trained_model();
        model.format_version = 99;
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn checksum_detects_tampering() {
        let model = trained_model();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let mut value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        value["model"]["parameters"]["linear"]["bias"] = serde_json::json!(2.25);
        std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn kind_and_parameters_must_agree() {
        let mut model = trained_model();
        model.kind = ModelKind::RbfSvm;
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn layout_guard_rejects_other_layouts() {
        let model = trained_model();
        assert!(model.check_layout("llf-v1-7668").is_ok());
        assert!(model.check_layout("llf-v2-9999").is_err());
    }
}
