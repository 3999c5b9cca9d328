use std::path::{Path, PathBuf};

use thiserror::Error;

/// Exit status for a bad input file, argument or parameter set.
pub const EXIT_INPUT: i32 = 2;
/// Exit status when a fit or diagnostic did not converge.
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] mpcs_core::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(mpcs_core::Error::Diagnostic(_)) => EXIT_NONCONVERGENCE,
            _ => EXIT_INPUT,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
