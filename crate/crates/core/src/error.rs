//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any fedcell operation.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No allocation can satisfy the constraint set; the message names the
    /// binding constraint.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Vector lengths or layer maps do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A layer name is missing from a model's layer map.
    #[error("unknown layer {name:?}")]
    UnknownLayer { name: String },

    /// A dataset partition request cannot be met; names the class that
    /// ran out of samples.
    #[error("insufficient samples for class {class}: need {needed}, have {available}")]
    InsufficientSamples {
        class: usize,
        needed: usize,
        available: usize,
    },

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations: {detail}")]
    NoConvergence { iterations: usize, detail: String },

    /// Malformed binary input (IDX files, checkpoints).
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
