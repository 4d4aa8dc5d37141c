//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The normalized weights do not satisfy the semivalue admissibility
    /// condition `sum_j C(n-1, j-1) * w(j) = n`.
    #[error("weight scheme fails admissibility: |sum - n|/n = {relative_gap:.3e} (n = {n})")]
    AdmissibilityViolation { n: usize, relative_gap: f64 },

    #[error("metric `{metric}` is incompatible with {labels} labels")]
    IncompatibleMetric {
        metric: &'static str,
        labels: &'static str,
    },

    #[error("exact enumeration supports at most {max} points, got {n}")]
    SizeLimit { n: usize, max: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown point id {0}")]
    UnknownPoint(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
