//! Error type shared by every module.

use thiserror::Error;

/// Failures raised while evaluating special functions, derivatives, marginals or models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("quantity diverges: {0}")]
    Divergence(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("fractional derivative unsupported for {0}")]
    UnsupportedFractional(String),

    #[error("series constant term must be nonzero (and positive for real powers)")]
    NonPositiveConstantTerm,

    #[error("series too large: {0}")]
    SeriesTooLarge(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rate may become negative: {0}")]
    NegativeRateRisk(String),

    #[error("non-integer gamma shape with coupled random effects: {0}")]
    NonIntegerShapeWithCoupling(String),

    #[error("equivalent forms disagree: {0}")]
    FormMismatch(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
