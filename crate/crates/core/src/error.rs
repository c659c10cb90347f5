use thiserror::Error;

/// Errors produced by dataset handling, seeding and solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("column '{0}' not found in header")]
    MissingColumn(String),

    #[error("no rows remain after dropping {dropped} rows with missing or non-numeric values")]
    EmptyAfterDrop { dropped: usize },

    #[error("column '{0}' has zero variance; cannot standardize")]
    ZeroVariance(String),

    #[error("row {0} has zero Euclidean norm; cannot unit-normalize")]
    ZeroNormRow(usize),

    #[error("sample size {m} exceeds dataset size {n}")]
    SampleTooLarge { m: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fixed point did not converge: residual {residual:.3e} after {iters} iterations")]
    NoConvergence { residual: f64, iters: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
