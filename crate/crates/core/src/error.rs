use thiserror::Error;

/// Errors produced by signal, frame, prox, solver and restoration operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes or channel counts do not match.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A decimation factor does not divide a signal length.
    #[error("length {length} is not divisible by factor {factor}")]
    Divisibility { length: usize, factor: usize },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The requested operator is not a frame (left invertibility fails).
    #[error("not a frame: {0}")]
    NotAFrame(String),

    /// An operator could not be constructed from the given pieces.
    #[error("construction failed: {0}")]
    Construction(String),

    /// A per-frequency system matrix is numerically singular.
    #[error("preconditioner failure: {0}")]
    Preconditioner(String),

    /// A preconditioner no longer matches the problem it was built for.
    #[error("stale preconditioner: {0}")]
    StalePreconditioner(String),

    /// The iterative solver aborted (non-finite iterate, bad schedule, ...).
    #[error("solver failure: {0}")]
    Solver(String),

    /// A dense test oracle was asked for an instance beyond its size guard.
    #[error("oracle instance too large: {0}")]
    OracleTooLarge(String),

    /// prox of phi o L is only available when L L* is a multiple of the identity.
    #[error("composition unsupported: {0}")]
    CompositionUnsupported(String),

    /// A coefficient file or descriptor could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
