use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Core(msfi_core::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl From<msfi_core::Error> for CliError {
    /// Parameter errors become validation errors naming the parameter.
    fn from(e: msfi_core::Error) -> Self {
        match e {
            msfi_core::Error::InvalidParameter { name, reason } => CliError::Validation {
                field: name.to_string(),
                reason,
            },
            msfi_core::Error::MissingParameter(name) => CliError::Validation {
                field: name,
                reason: "missing".into(),
            },
            msfi_core::Error::Unsupported(what) => CliError::Unsupported(what),
            msfi_core::Error::Placement(what) => CliError::Validation {
                field: "mixing".into(),
                reason: what,
            },
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    /// Process exit code: 2 for anything caught before computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } | CliError::Unsupported(_) => 2,
            _ => 1,
        }
    }
}
