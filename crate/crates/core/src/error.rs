use thiserror::Error;

/// Errors produced by the field laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("missing required parameter `{0}`")]
    MissingParameter(String),

    #[error("negative spectral coefficient {value:e} at mode {mode} (tolerance {tolerance:e})")]
    NegativeSpectrum {
        mode: usize,
        value: f64,
        tolerance: f64,
    },

    #[error("quadrature failed to converge on [{lower}, {upper}] (estimated error {error:e})")]
    Quadrature { lower: f64, upper: f64, error: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    #[error("region placement infeasible: {0}")]
    Placement(String),

    #[error("malformed field file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
