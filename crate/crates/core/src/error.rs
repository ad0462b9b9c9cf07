use thiserror::Error;

/// Errors raised by the `otreg` library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("no perfect matching exists within the stored entries (row {row} cannot be augmented)")]
    Infeasible { row: usize },

    #[error("brute-force oracle supports n <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("batch of {0} rows cannot be normalized in train mode (need at least 2)")]
    BatchTooSmall(usize),

    #[error("forward cache is stale or does not match these parameters: {0}")]
    StaleCache(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
