use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0}")]
    Numerical(#[from] mfgbelief_core::Error),
}

impl LabError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            LabError::Validation(_) | LabError::Numerical(_) => ExitCode::from(2),
            LabError::Io(_) => ExitCode::from(1),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
