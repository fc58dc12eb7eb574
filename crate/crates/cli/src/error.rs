use cpt_core::error::ScanError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// 2 for anything the user can fix in the input, 3 for numerical
    /// failures, 4 for failed validation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::InvalidConfig(_) | ScanError::Reference(_) | ScanError::Model(_) => CliError::Config(e.to_string()),
            ScanError::Solver { .. } | ScanError::Setup(_) | ScanError::Fit(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
