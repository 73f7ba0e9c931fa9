use std::path::Path;

use saute_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

/// Errors surfaced by subcommands. Each maps to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path} already exists; pass --force to overwrite")]
    Exists { path: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;
pub const EXIT_IO: i32 = 5;

impl CliError {
    pub fn config(path: &Path, message: impl Into<String>) -> Self {
        CliError::Config { path: path.display().to_string(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Io { .. } | CliError::Exists { .. } => EXIT_IO,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidSpec(_) | CoreError::InvalidConfig(_) | CoreError::UnknownFixture(_) | CoreError::Json(_) => {
            EXIT_CONFIG
        }
        CoreError::NotConverged { .. } | CoreError::Diverged { .. } => EXIT_CONVERGENCE,
        CoreError::MonotonicityViolation { .. } => EXIT_VERIFICATION,
        CoreError::Io { .. } => EXIT_IO,
        CoreError::Rollout { source, .. } | CoreError::Evaluation { source, .. } => core_exit_code(source),
        _ => EXIT_RUNTIME,
    }
}
