use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum DrbpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("numerical trouble: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DrbpError>;
