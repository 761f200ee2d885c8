use thiserror::Error;

use crate::linalg::EigenPair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular system in {0}")]
    Singular(&'static str),

    /// Carries the best iterate so callers can decide whether it is usable.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Box<EigenPair>,
    },

    #[error("truncation removed every entry")]
    DegenerateTruncation,

    #[error("operator has a zero spectrum on the searched subspace")]
    ZeroSpectrum,

    #[error("non-finite iterate in {0}")]
    NonFinite(&'static str),

    #[error("no sparse near-null vector found (residual {residual:e} > tolerance {tolerance:e})")]
    NearNullNotFound { residual: f64, tolerance: f64 },

    #[error("degenerate factor: u'Pu = {0:e}")]
    DegenerateFactor(f64),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
