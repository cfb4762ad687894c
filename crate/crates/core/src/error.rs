use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("criterion not applicable: {0}")]
    NotApplicable(String),

    #[error("no crossing found in the probed range")]
    NoCrossing,

    #[error("zero direction: the difference quotient is undefined for h = 0")]
    ZeroDirection,

    #[error("objective diverged at iteration {0}")]
    Divergence(usize),

    #[error("unsupported profile for this operation: {0}")]
    UnsupportedProfile(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
