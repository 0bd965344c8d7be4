use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ehaoi::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0} structure check(s) failed")]
    ChecksFailed(usize),

    #[error("{0} grid point(s) failed; see status column")]
    PartialFailure(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(ehaoi::Error::InvalidParameter { .. }) => 2,
            CliError::ChecksFailed(_) | CliError::PartialFailure(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
