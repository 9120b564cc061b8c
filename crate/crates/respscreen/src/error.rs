//! Error type shared across the pipeline.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by any pipeline stage.
///
/// The CLI maps these onto process exit codes: configuration problems
/// exit 2, partial data failures exit 3, train/test leakage exits 4 and
/// numeric failures exit 5.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid WAV file {path}: {reason}")]
    Wav { path: PathBuf, reason: String },

    #[error("manifest {path} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("audio validation failed for {id}: {reason}")]
    AudioInvalid { id: String, reason: String },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("train/test leakage: {0}")]
    Leakage(String),

    #[error("numeric failure in {stage}: {reason}")]
    Numeric { stage: String, reason: String },

    #[error("feature file {path}: {reason}")]
    FeatureFile { path: PathBuf, reason: String },

    #[error("model file {path}: {reason}")]
    ModelFile { path: PathBuf, reason: String },

    #[error("artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Wraps an I/O error with the path that produced it.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 leakage, 5 compute.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. }
            | Error::Wav { .. }
            | Error::Manifest { .. }
            | Error::AudioInvalid { .. }
            | Error::DegenerateSignal(_)
            | Error::Dataset(_)
            | Error::FeatureFile { .. }
            | Error::ModelFile { .. }
            | Error::Artifact { .. } => 3,
            Error::Leakage(_) => 4,
            Error::Numeric { .. } => 5,
            Error::Other(_) => 1,
        }
    }
}
