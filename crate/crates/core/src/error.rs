use thiserror::Error;

/// Errors raised anywhere in the simulator.
///
/// Variants split into input problems (bad parameters, malformed files) and
/// numerical failures; the CLI maps the two groups onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grid too small: {what} needs a span of at least {required_ps:.3} ps, grid spans {actual_ps:.3} ps")]
    GridTooSmall {
        what: &'static str,
        required_ps: f64,
        actual_ps: f64,
    },

    #[error("envelope phase steps by {step:.3} rad between adjacent samples near t = {t_ps:.3} ps; the field is undersampled")]
    PhaseUnwrap { t_ps: f64, step: f64 },

    #[error("evanescent diffraction order: sin(theta_d) = {sin_theta:.4}")]
    EvanescentOrder { sin_theta: f64 },

    #[error("integrator step underflow at t = {t_ps:.4} ps (step {step_ps:.3e} ps)")]
    StepUnderflow { t_ps: f64, step_ps: f64 },

    #[error("density matrix invariant violated at t = {t_ps:.4} ps: {what} = {value:.3e}")]
    InvariantViolation {
        t_ps: f64,
        what: &'static str,
        value: f64,
    },

    #[error("{0}")]
    Undefined(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. } | Error::InvariantViolation { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
