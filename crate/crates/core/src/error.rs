use thiserror::Error;

/// Errors raised by the testing pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EcotError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A tuning parameter is invalid (e.g. `k` larger than the pool).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The method cannot run on this problem (e.g. missing non-null data).
    #[error("configuration error: {0}")]
    Config(String),

    /// A score model does not satisfy the symmetry contract an operation needs.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Full permutation enumeration was requested beyond the hard cap.
    #[error("enumeration refused: {free} free indices exceeds the cap of {cap}; use a reduced form")]
    BudgetExceeded { free: usize, cap: usize },

    /// Malformed input data (shape mismatch, non-finite values).
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, EcotError>;
