use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EdaError {
    #[error("label {label} at index {index} is outside [0, {classes})")]
    InvalidLabel {
        index: usize,
        label: i64,
        classes: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected d = {expected}, got d = {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("heterogeneous dims unsupported in single view (source d = {source_dim}, target d = {target_dim})")]
    HeterogeneousDims { source_dim: usize, target_dim: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, EdaError>;

impl EdaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EdaError::Io {
            path: path.into(),
            source,
        }
    }
}
