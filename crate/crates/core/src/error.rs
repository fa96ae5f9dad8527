use thiserror::Error;

use crate::linalg::LinalgError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("feature `{name}` is not finite ({value})")]
    NonFiniteFeature { name: &'static str, value: f64 },

    #[error("machine learning error: {0}")]
    Ml(String),

    #[error("expected {expected} features, got {got}")]
    FeatureLength { expected: usize, got: usize },

    #[error("ensemble mode mismatch: expected {expected}, found {found}")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("incompatible model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
