//! Error taxonomy shared by every module of the crate.

use thiserror::Error;

/// Any failure the numerical core can report.
#[derive(Debug, Error)]
pub enum SdeError {
    /// A problem label or construction parameter was rejected.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation received structurally invalid input (dimension or length
    /// mismatches, out-of-range parameters).
    #[error("argument error: {0}")]
    Argument(String),
    /// A stated precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A numeric evaluation produced a non-finite or otherwise unusable
    /// value; the message carries the offending input.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The per-step nonlinear solve of the implicit scheme failed.
    #[error("solver failed at step {step}: {message}")]
    Solver { step: usize, message: String },
    /// Reading or writing a grid dump failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Result alias used throughout the crate.
pub type Result<T, E = SdeError> = std::result::Result<T, E>;
