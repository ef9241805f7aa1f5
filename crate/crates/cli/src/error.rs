use std::process::ExitCode;

use lagflow_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    /// The run finished but missed its stated tolerance.
    #[error("tolerance not met: {0}")]
    Tolerance(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 0 success, 1 usage, 2 numerical failure, 3 tolerance unmet.
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Tolerance(_) => 3,
            CliError::Core(e) => match e {
                CoreError::NonFinite { .. }
                | CoreError::BlowUp { .. }
                | CoreError::EigenNonConvergence { .. }
                | CoreError::LinearSolve { .. } => 2,
                CoreError::NonConvergence { .. } => 3,
                _ => 1,
            },
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
