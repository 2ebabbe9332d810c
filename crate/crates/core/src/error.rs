use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("target column `{0}` not found in header")]
    MissingTarget(String),

    #[error("target column must be 0 or 1, found `{value}` at data row {row}")]
    NonBinaryTarget { row: usize, value: String },

    #[error("non-numeric value `{value}` at data row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value at data row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("{n} features is too many for subset enumeration (max {max}); use the sampled estimator")]
    TooManyFeatures { n: usize, max: usize },

    #[error("malformed model file at line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing {what}: {} not found (run `{producer}` first)", path.display())]
    MissingArtifact {
        what: String,
        path: PathBuf,
        producer: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
