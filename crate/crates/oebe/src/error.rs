//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("degenerate predictive variance {value:.3e}")]
    DegenerateVariance { value: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("all ensemble weights underflowed at step {step}")]
    WeightUnderflow { step: usize },

    #[error("numerical failure at step {step}: {reason}")]
    NumericalFailure { step: usize, reason: String },

    #[error("target variance is zero; normalized MSE is undefined")]
    ZeroVariance,

    #[error("csv parse failure at row {row}, column {column}: {reason}")]
    CsvParse {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema version mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: u32, got: u32 },

    #[error("config hash mismatch: checkpoint was produced by a different configuration")]
    ConfigHashMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
