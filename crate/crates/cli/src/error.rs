use std::path::PathBuf;

use thiserror::Error;

use dnl_core::ErrorKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config{}: {detail}", key.as_ref().map(|k| format!(" key `{k}`")).unwrap_or_default())]
    Config { key: Option<String>, detail: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {detail}", path.display())]
    Artifact { path: PathBuf, detail: String },
    #[error(transparent)]
    Core(#[from] dnl_core::Error),
    #[error("verification failed: {}", failed.join(", "))]
    Verification { failed: Vec<String> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } | CliError::Artifact { .. } => {
                EXIT_VALIDATION
            }
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            },
            CliError::Verification { .. } => EXIT_VERIFICATION,
        }
    }
}
