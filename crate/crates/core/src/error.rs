//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension outside the supported range of the requested operation.
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    /// Kernel / grid / field dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Kernel with zero L1 norm fed to an operation that divides by it.
    #[error("degenerate kernel: zero L1 norm")]
    DegenerateKernel,

    /// A grid violates a structural requirement (weights, symmetry, cell shape).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Radius policy with an empty or inconsistent candidate set.
    #[error("invalid radius policy: {0}")]
    InvalidPolicy(String),

    /// Numeric-domain violation (nonpositive level, out-of-range argument, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed identifier, table file, or configuration value.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
