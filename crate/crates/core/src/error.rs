use thiserror::Error;

/// Errors raised by the physical models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid input `{name}`: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("step {step_s} s exceeds the accuracy guard of {limit_s:.1} s (1/20 orbital period)")]
    StepTooLarge { step_s: f64, limit_s: f64 },

    #[error("sample cadence {cadence_s} s is coarser than the {limit_s} s pass-finding limit")]
    CadenceTooCoarse { cadence_s: f64, limit_s: f64 },

    #[error("altitude {altitude_m:.0} m outside the validated range [{min_m:.0}, {max_m:.0}] m")]
    AltitudeOutOfRange { altitude_m: f64, min_m: f64, max_m: f64 },

    #[error("no beacon pixel above the detection threshold")]
    LockLost,

    #[error("pointing run lost lock; no loss value is defined")]
    PointingLockLost,
}

impl ModelError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidInput {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Reject non-finite values with a named diagnostic.
pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::invalid(name, format!("must be finite, got {value}")))
    }
}
