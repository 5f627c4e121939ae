use std::path::PathBuf;

use dirac_core::SpectralError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] SpectralError),
    #[error("bound violation: {0}")]
    Violation(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Violation(_) => 4,
            CliError::Output { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
