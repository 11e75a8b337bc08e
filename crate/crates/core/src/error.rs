use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("no AC sweet spot: {0}")]
    NoSweetSpot(String),

    #[error("integration failed at t = {time_ns} ns: {reason}")]
    Integration { time_ns: f64, reason: String },

    #[error("channel validation failed: {0}")]
    ChannelValidation(String),

    #[error("fit failed: {reason} (residual norm {residual_norm:.3e})")]
    Fit { reason: String, residual_norm: f64 },

    #[error("slice contrast {contrast:.3} is below the 0.1 signal floor")]
    LowSignal { contrast: f64 },

    #[error("leakage {leakage:.3e} makes the phase extraction unreliable")]
    UnreliablePhase { leakage: f64 },

    #[error("calibration failed: no candidate met the leakage threshold (best |phi - pi| = {best_phase_error:.3e}, leakage = {best_leakage:.3e})")]
    CalibrationFailed {
        best: Box<crate::calibration::CzCalibration>,
        best_phase_error: f64,
        best_leakage: f64,
    },

    #[error("no interior minimum in curve: {0}")]
    NoMinimum(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
