use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Configuration could not be read or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Valid inputs for which no meaningful result exists.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) | CliError::Output(_) => 1,
        })
    }
}

impl From<tfqkd_core::Error> for CliError {
    fn from(e: tfqkd_core::Error) -> Self {
        use tfqkd_core::Error::*;
        match e {
            InvalidParameter { .. } | Aliasing { .. } | SampleRateMismatch(..) | TraceFormat(_) => {
                CliError::Config(e.to_string())
            }
            EmptyFrame { .. } | ZeroVariance(_) | DelayOutOfRange { .. } => {
                CliError::Infeasible(e.to_string())
            }
        }
    }
}
