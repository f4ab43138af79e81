use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("position {x} outside domain [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Amplitudes left the double range while scaling was disabled.
    #[error("amplitude overflow in segment {segment}")]
    Overflow { segment: usize },

    #[error("solution does not diverge past the onset threshold")]
    NotDivergent,

    #[error("divergence sign does not change on [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("verification window [{lo}, {hi}] spans {crossings} eigenvalues")]
    UnreliableVerification { lo: f64, hi: f64, crossings: usize },

    #[error("insufficient data: need {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
