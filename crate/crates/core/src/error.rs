use thiserror::Error;

/// Errors raised by the solvers and builders in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("matrix is not hermitian (max |A - A^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("Fock cutoff {cutoff} too small: {reason}")]
    CutoffTooSmall { cutoff: usize, reason: String },

    #[error("star configuration supports 1 to 6 batteries, got {0}")]
    TooManyBatteries(usize),

    #[error("{what} requires resonant parameters (all detunings zero)")]
    RequiresResonance { what: &'static str },

    #[error("step size underflow; last good time t = {t_last}")]
    StepSizeUnderflow { t_last: f64 },

    #[error("integrator exceeded {max_steps} steps; last good time t = {t_last}")]
    MaxStepsExceeded { max_steps: usize, t_last: f64 },

    #[error("steady state is not unique (null-space dimension {nullity})")]
    DegenerateSteadyState { nullity: usize },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("drive detuning sits on the normal-mode pole |delta_Cd| = g")]
    OnResonancePole,

    #[error("charging threshold still exceeded at horizon t = {horizon}")]
    NotConverged { horizon: f64 },

    #[error("parameters do not match the requested asymptotic regime: {0}")]
    RegimeMismatch(String),

    #[error("unstable trajectory {trajectory}: norm {norm:.3e} at step {step}")]
    Unstable {
        trajectory: usize,
        step: usize,
        norm: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0}")]
    Incompatible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
