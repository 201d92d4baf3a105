use std::path::PathBuf;

use fdcrack_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing output: {0}")]
    Write(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
}

impl CliError {
    /// 1 for configuration and input errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidDomain(_)
            | CoreError::ZeroSubdivisions
            | CoreError::UnsupportedDegree(_)
            | CoreError::InvalidCrack(_)
            | CoreError::InvalidCouple(_)
            | CoreError::InvalidArgument(_)
            | CoreError::Unsupported(_) => CliError::Config(e.to_string()),
            e => CliError::Numerical(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
