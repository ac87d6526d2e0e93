use thiserror::Error;

/// Errors raised by the forward models, estimators and trace I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its physical domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The operation is defined only for resonant drive.
    #[error("detuning must be zero for this model (got {0} MHz)")]
    OffResonance(f64),

    /// Arithmetic between traces carrying different unit tags.
    #[error("unit mismatch: expected {expected}, found {found}")]
    UnitMismatch { expected: String, found: String },

    /// A sampled grid that violates the trace invariants.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Convolution grid too coarse for the instrument linewidth.
    #[error("grid step {step} MHz exceeds fwhm/4 = {limit} MHz")]
    Undersampled { step: f64, limit: f64 },

    /// The chain transmits none of the laser field, so the normalized triple is undefined.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// The fit is under-determined.
    #[error("rank deficient problem: {0}")]
    RankDeficient(String),

    /// The input data are insufficient for the requested analysis.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
