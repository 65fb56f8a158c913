use thiserror::Error;

/// Errors produced by the metricflow library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed data: wrong shapes, non-finite or negative entries.
    #[error("structural error: {0}")]
    Structural(String),

    /// Well-formed data that violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("time {0} is outside the grid")]
    TimeOutOfRange(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("iteration limit reached in {0}")]
    IterationLimit(&'static str),

    /// Something that must not happen did happen.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
