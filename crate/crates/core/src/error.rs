use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical blow-up at time step {step}")]
    NumericalBlowup {
        step: usize,
        /// Coefficient vector that produced the blow-up, when known.
        coeffs: Option<Vec<f64>>,
    },

    #[error("no convergence after {iterations} iterations (last energy delta {last_delta:e})")]
    Convergence { iterations: usize, last_delta: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attaches the offending coefficient vector to a blow-up error.
    pub fn with_coeffs(self, c: &[f64]) -> Self {
        match self {
            Error::NumericalBlowup { step, .. } => Error::NumericalBlowup {
                step,
                coeffs: Some(c.to_vec()),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
