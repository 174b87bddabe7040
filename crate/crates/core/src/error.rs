//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A cell failed to parse against the declared schema.
    #[error("schema error in {source_id}: row {row}, column '{column}': {detail}")]
    Schema {
        source_id: String,
        row: usize,
        column: String,
        detail: String,
    },

    /// A structural invariant of the data was violated (duplicate dates,
    /// colliding column names, misaligned lengths).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Bad configuration: unknown category, hyperparameter out of bounds,
    /// invalid search space.
    #[error("configuration error: {0}")]
    Config(String),

    /// No fully-observed window exists for training-range selection.
    #[error("no fully-observed date window exists{0}")]
    EmptyRange(String),

    /// An indicator window exhausted the series (no post-warm-up values).
    #[error("warm-up exhausted: {0}")]
    WarmUp(String),

    /// Labels contain a single class where two are required.
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    /// Operation not supported for this model kind.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Feature-dimension mismatch between fit and predict.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A pipeline stage was invoked before its upstream artifacts exist.
    #[error("dependency error: stage '{stage}' requires artifacts from '{requires}': {detail}")]
    Dependency {
        stage: String,
        requires: String,
        detail: String,
    },

    /// Fit-scope audit violation (an artifact saw rows outside its allowance).
    #[error("audit violation: {0}")]
    AuditViolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
