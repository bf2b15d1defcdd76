use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("Hilbert-space dimension {dim} exceeds the capacity limit of {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("detuning must be nonzero for adiabatic elimination")]
    SingularDetuning,

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("integrator step size underflow: {steps} steps needed for t = {duration}")]
    StepSizeUnderflow { steps: f64, duration: f64 },

    #[error("density-matrix trace drifted by {0:e}; reduce the step size")]
    TraceDrift(f64),

    #[error("outcome has zero probability")]
    ImpossibleOutcome,

    #[error("undefined quantity: {0}")]
    Undefined(&'static str),

    #[error("quadrature failed to reach tolerance {tol:e} (estimated error {err:e})")]
    Quadrature { tol: f64, err: f64 },

    #[error("cluster growth did not reach size {target} within {attempts} attempts (largest {largest})")]
    GrowthNotConverged {
        target: usize,
        attempts: usize,
        largest: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
