//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not positive semi-definite: eigenvalue {min_eig:.6e} below tolerance -{tol:.3e}")]
    NotPsd { min_eig: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("root transform Jacobian undefined: vector entry {index} is zero")]
    RootSegmentZero { index: usize },

    /// Zero absolute band sum in the ratio statistic. The test engine turns
    /// this into a forced rejection rather than a failure.
    #[error("ratio statistic degenerate: band {band} sums to zero in absolute value")]
    DegenerateRatio { band: usize },

    #[error("covariance diagonal entry {index} is not positive; correlation undefined")]
    NonpositiveDiagonal { index: usize },

    #[error("denominator trace of the test statistic is not positive")]
    ZeroTrace,

    #[error("{what} is singular")]
    Singular { what: &'static str },

    #[error("sample too small: need at least {need} observations, got {got}")]
    TooFewRows { need: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("all resampling replicates were discarded as non-finite")]
    AllReplicatesDiscarded,
}

pub type Result<T> = std::result::Result<T, Error>;
