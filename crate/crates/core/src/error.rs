use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid variance profile: {0}")]
    InvalidProfile(String),

    #[error("invalid band specification: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("matrix dimension {n} exceeds dense limit {limit}; use a polynomial test function instead")]
    DenseLimit { n: usize, limit: usize },

    #[error("eigensolver did not converge (replicate {replicate:?})")]
    EigenNoConvergence { replicate: Option<u64> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("diagnostics unavailable: {0}")]
    Diagnostics(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("experiment aborted after {completed} completed replicates: {source}")]
    Partial {
        completed: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
