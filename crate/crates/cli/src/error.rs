use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: malformed file, unknown key, out-of-domain value.
    #[error("{0}")]
    Validation(String),
    #[error("{path}:{line}:{column}: {msg}")]
    Located {
        path: PathBuf,
        line: u64,
        column: usize,
        msg: String,
    },
    #[error("fit did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Core(#[from] spinfit::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use spinfit::Error as E;
        match self {
            CliError::Validation(_) | CliError::Located { .. } => exit::VALIDATION,
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
            CliError::Core(E::Domain { .. } | E::InvalidInput(_) | E::InsufficientData { .. }) => exit::VALIDATION,
            CliError::Core(_) | CliError::Io { .. } | CliError::Other(_) => exit::OTHER,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
