use std::process::ExitCode;

use matched_did::Error as CoreError;

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad configuration, or an unwritable output location.
    #[error("{0}")]
    Usage(String),
    /// The matcher could not satisfy the declared constraints.
    #[error("{0}")]
    Infeasible(String),
    /// The input data are unreadable, malformed, or carry no information.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Infeasible { .. } => CliError::Infeasible(msg),
            CoreError::InvalidParameter(_) | CoreError::OutOfDomain(_) | CoreError::Spec(_) => CliError::Usage(msg),
            CoreError::Structural(_) | CoreError::Degenerate(_) | CoreError::NoInformation(_) | CoreError::OutcomeKind(_) => {
                CliError::Data(msg)
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
