//! Run configuration.
//!
//! Settings come from three layers with fixed precedence: built-in
//! defaults, then a plain-text `key = value` file, then command-line
//! overrides. The effective configuration has a canonical text form
//! whose hash is embedded in every artifact, so a report names the
//! exact settings that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::classifiers::cv::{GAMMA_SCALES, LAMBDA_GRID, MIN_SAMPLES_LEAF_GRID};
use crate::functionals::layout;
use crate::lld::FrameConfig;
use crate::{Error, Result};

/// Effective settings of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub audio_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub dev_ratio: f64,
    pub folds: usize,
    pub min_age: u32,
    pub max_age: u32,
    pub min_duration_ms: f64,
    pub min_peak: f64,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub layout_id: String,
    pub family: String,
    pub balanced: bool,
    pub lambda_grid: Vec<f64>,
    pub gamma_scales: Vec<f64>,
    pub min_samples_leaf_grid: Vec<usize>,
    pub fusion: Vec<String>,
    pub target_specificity: f64,
    pub workers: usize,
    pub binary_features: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: PathBuf::from("manifest.csv"),
            audio_root: None,
            output_dir: PathBuf::from("out"),
            seed: 7,
            dev_ratio: 0.8,
            folds: 5,
            min_age: 15,
            max_age: 80,
            min_duration_ms: 100.0,
            min_peak: 1e-4,
            frame_ms: 25.0,
            hop_ms: 10.0,
            layout_id: layout::LAYOUT_ID.to_string(),
            family: "logistic".to_string(),
            balanced: true,
            lambda_grid: LAMBDA_GRID.to_vec(),
            gamma_scales: GAMMA_SCALES.to_vec(),
            min_samples_leaf_grid: MIN_SAMPLES_LEAF_GRID.to_vec(),
            fusion: vec![
                "breathing".to_string(),
                "cough".to_string(),
                "speech".to_string(),
                "symptoms".to_string(),
            ],
            target_specificity: 0.95,
            workers: 0,
            binary_features: false,
        }
    }
}

impl RunConfig {
    /// Defaults, then the file layer (if any), then the override layer.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (key, value) in parse_pairs(&text)? {
                config.apply(&key, &value)?;
            }
        }
        for (key, value) in overrides {
            config.apply(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let fail = |what: &str| Error::Config(format!("{key}: expected {what}, got {value:?}"));
        match key {
            "manifest" => self.manifest = PathBuf::from(value),
            "audio_root" => {
                self.audio_root = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| fail("an unsigned integer"))?,
            "dev_ratio" => self.dev_ratio = value.parse().map_err(|_| fail("a number"))?,
            "folds" => self.folds = value.parse().map_err(|_| fail("an unsigned integer"))?,
            "min_age" => self.min_age = value.parse().map_err(|_| fail("an unsigned integer"))?,
            "max_age" => self.max_age = value.parse().map_err(|_| fail("an unsigned integer"))?,
            "min_duration_ms" => {
                self.min_duration_ms = value.parse().map_err(|_| fail("a number"))?
            }
            "min_peak" => self.min_peak = value.parse().map_err(|_| fail("a number"))?,
            "frame_ms" => self.frame_ms = value.parse().map_err(|_| fail("a number"))?,
            "hop_ms" => self.hop_ms = value.parse().map_err(|_| fail("a number"))?,
            "layout_id" => self.layout_id = value.to_string(),
            "family" => self.family = value.to_string(),
            "balanced" => self.balanced = parse_bool(value).ok_or_else(|| fail("a boolean"))?,
            "lambda_grid" => self.lambda_grid = parse_list(value).ok_or_else(|| fail("numbers"))?,
            "gamma_scales" => {
                self.gamma_scales = parse_list(value).ok_or_else(|| fail("numbers"))?
            }
            "min_samples_leaf_grid" => {
                self.min_samples_leaf_grid =
                    parse_list(value).ok_or_else(|| fail("unsigned integers"))?
            }
            "fusion" => {
                self.fusion = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "target_specificity" => {
                self.target_specificity = value.parse().map_err(|_| fail("a number"))?
            }
            "workers" => self.workers = value.parse().map_err(|_| fail("an unsigned integer"))?,
            "binary_features" => {
                self.binary_features = parse_bool(value).ok_or_else(|| fail("a boolean"))?
            }
            other => return Err(Error::Config(format!("unknown configuration key {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dev_ratio > 0.0 && self.dev_ratio < 1.0) {
            return Err(Error::Config(format!(
                "dev_ratio must lie inside (0, 1), got {}",
                self.dev_ratio
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.min_age > self.max_age {
            return Err(Error::Config(format!(
                "min_age {} exceeds max_age {}",
                self.min_age, self.max_age
            )));
        }
        if !(self.target_specificity >= 0.0 && self.target_specificity <= 1.0) {
            return Err(Error::Config(format!(
                "target_specificity must lie in [0, 1], got {}",
                self.target_specificity
            )));
        }
        if self.lambda_grid.is_empty()
            || self.gamma_scales.is_empty()
            || self.min_samples_leaf_grid.is_empty()
        {
            return Err(Error::Config("hyperparameter grids must be non-empty".into()));
        }
        if self.fusion.is_empty() {
            return Err(Error::Config("fusion member list must be non-empty".into()));
        }
        FrameConfig {
            window_length_ms: self.frame_ms,
            hop_ms: self.hop_ms,
            ..FrameConfig::default()
        }
        .validate(crate::audio::SAMPLE_RATE)?;
        Ok(())
    }

    /// Framing settings for feature extraction.
    pub fn frame_config(&self) -> FrameConfig {
        FrameConfig {
            window_length_ms: self.frame_ms,
            hop_ms: self.hop_ms,
            ..FrameConfig::default()
        }
    }

    /// Every effective setting as sorted `key = value` lines; the basis
    /// of the config hash.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("audio_root", display_opt(&self.audio_root));
        line("balanced", self.balanced.to_string());
        line("binary_features", self.binary_features.to_string());
        line("dev_ratio", self.dev_ratio.to_string());
        line("family", self.family.clone());
        line("folds", self.folds.to_string());
        line("frame_ms", self.frame_ms.to_string());
        line("fusion", self.fusion.join(","));
        line("gamma_scales", join_list(&self.gamma_scales));
        line("hop_ms", self.hop_ms.to_string());
        line("lambda_grid", join_list(&self.lambda_grid));
        line("layout_id", self.layout_id.clone());
        line("manifest", self.manifest.display().to_string());
        line("max_age", self.max_age.to_string());
        line("min_age", self.min_age.to_string());
        line("min_duration_ms", self.min_duration_ms.to_string());
        line("min_peak", self.min_peak.to_string());
        line("min_samples_leaf_grid", join_list(&self.min_samples_leaf_grid));
        line("output_dir", self.output_dir.display().to_string());
        line("seed", self.seed.to_string());
        line("target_specificity", self.target_specificity.to_string());
        line("workers", self.workers.to_string());
        out
    }

    /// Hash of the full effective configuration.
    pub fn hash(&self) -> String {
        hex_sha256(self.canonical_text().as_bytes())
    }

    /// Hash of only the settings that change extracted features; the
    /// resume check for extraction keys on this, so unrelated settings
    /// (seed, model family) do not invalidate cached features.
    pub fn extract_section_hash(&self) -> String {
        let section = format!(
            "frame_ms = {}\nhop_ms = {}\nlayout_id = {}\nmin_duration_ms = {}\nmin_peak = {}\n",
            self.frame_ms, self.hop_ms, self.layout_id, self.min_duration_ms, self.min_peak
        );
        hex_sha256(section.as_bytes())
    }
}

fn display_opt(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => p.display().to_string(),
        None => String::new(),
    }
}

fn join_list<T: std::fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().ok())
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment and blank lines
/// are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("config line {}: expected key = value", i + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn defaults_are_valid() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.dev_ratio, 0.8);
        assert_eq!(config.folds, 5);
        assert_eq!(config.layout_id, "llf-v1-7668");
    }

    #[test]
    fn file_layer_overrides_defaults_and_flags_override_the_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# run settings\nseed = 99\nfolds = 3\n").unwrap();
        let overrides = vec![("folds".to_string(), "4".to_string())];
        let config = RunConfig::load(Some(&path), &overrides).unwrap();
        assert_eq!(config.seed, 99, "file layer applied");
        assert_eq!(config.folds, 4, "override wins over file");
        assert_eq!(config.dev_ratio, 0.8, "untouched defaults survive");
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut config = RunConfig::default();
        assert!(config.apply("sead", "3").is_err(), "typo caught");
        assert!(config.apply("seed", "many").is_err());
        assert!(config.apply("balanced", "perhaps").is_err());
    }

    #[test]
    fn lists_parse_from_comma_text() {
        let mut config = RunConfig::default();
        config.apply("lambda_grid", "0.001, 0.1, 10").unwrap();
        assert_eq!(config.lambda_grid, vec![0.001, 0.1, 10.0]);
        config.apply("fusion", "breathing,symptoms").unwrap();
        assert_eq!(config.fusion, vec!["breathing", "symptoms"]);
        config.apply("min_samples_leaf_grid", "2,5").unwrap();
        assert_eq!(config.min_samples_leaf_grid, vec![2, 5]);
    }

    #[test]
    fn invalid_combinations_fail_validation() {
        let mut config = RunConfig::default();
        config.dev_ratio = 1.0;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.folds = 1;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.hop_ms = 50.0;
        assert!(config.validate().is_err(), "hop beyond window");
    }

    #[test]
    fn hash_tracks_content_not_layer() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        // The extract section ignores the seed but follows framing.
        assert_eq!(a.extract_section_hash(), b.extract_section_hash());
        b.hop_ms = 12.0;
        assert_ne!(a.extract_section_hash(), b.extract_section_hash());
    }

    #[test]
    fn pair_parser_reports_malformed_lines() {
        let pairs = parse_pairs("a = 1\n\n# note\nb=2\n").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("a".to_string(), "1".to_string()),
                ("b".to_string(), "2".to_string())
            ]
        );
        assert!(parse_pairs("just words\n").is_err());
    }
}
