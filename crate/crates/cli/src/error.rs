use std::path::Path;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Data(_) => exit::DATA,
            Self::Io(_) => exit::IO,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}

impl From<sgkit_core::Error> for CliError {
    fn from(e: sgkit_core::Error) -> Self {
        match e {
            sgkit_core::Error::Io(e) => Self::Io(e.to_string()),
            sgkit_core::Error::InvalidConfig(m) => {
                Self::Usage(format!("invalid configuration: {m}"))
            }
            sgkit_core::Error::InvalidK(k) => Self::Usage(format!("K must be positive, got {k}")),
            other => Self::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
