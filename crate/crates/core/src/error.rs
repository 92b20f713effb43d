use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested Rényi order violates a precondition of the bound being
    /// evaluated. `constraint` names the violated inequality.
    #[error("order {alpha} out of range: {constraint}")]
    OrderOutOfRange { alpha: u32, constraint: &'static str },

    /// No order in the searched range admits a finite bound.
    #[error("no admissible Renyi order: {0}")]
    Infeasible(&'static str),

    #[error("calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("conditional rounding exceeded {tries} attempts")]
    RoundingFailure { tries: usize },

    #[error("divergence is infinite: P has mass outside the support of Q")]
    DivergenceInfinite,

    #[error("integer overflow in exact arithmetic")]
    Overflow,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
