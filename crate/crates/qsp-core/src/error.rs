use thiserror::Error;

use crate::optimizer::SolveReport;

/// Crate-wide error type. Variants split into two families that the CLI maps
/// to exit codes: malformed or out-of-contract inputs (exit 1) and genuine
/// numerical failures (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The target polynomial violates a solvability requirement (e.g. sup
    /// norm at or above 1).
    #[error("invalid target: {0}")]
    InvalidTarget(String),

    /// Double precision (or the configured precision) is insufficient for the
    /// requested computation.
    #[error("precision failure: {0}")]
    Precision(String),

    /// A decomposition step hit a structurally degenerate configuration
    /// (vanishing leading coefficient, empty factorization, ...).
    #[error("degenerate decomposition: {0}")]
    Degenerate(String),

    /// Combinatorial enumeration would exceed the configured cap.
    #[error("enumeration limit: {0}")]
    EnumerationLimit(String),

    /// Iteration budget exhausted; the partial trace is attached for
    /// diagnosis.
    #[error("did not converge within {iterations} iterations (cost {cost:.3e})")]
    NonConvergence {
        iterations: usize,
        cost: f64,
        report: Box<SolveReport>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code classification: 1 = bad input, 2 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::InvalidTarget(_)
            | Error::EnumerationLimit(_)
            | Error::Io(_)
            | Error::Json(_) => 1,
            Error::Precision(_) | Error::Degenerate(_) | Error::NonConvergence { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
