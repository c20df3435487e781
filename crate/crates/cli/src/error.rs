use std::process::ExitCode;

use thiserror::Error;

/// Every way the front end can stop. Each class has its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Args(String),

    #[error("{path}: {source}")]
    Parse { path: String, source: erasim::engine::ParseError },

    #[error("invalid schedule: {0}")]
    Validation(String),

    #[error("{0}")]
    Runtime(String),

    #[error("{0} reproduce target(s) failed")]
    ReproduceFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ReproduceFailed(_) => 1,
            CliError::Args(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Validation(_) => 4,
            CliError::Runtime(_) => 5,
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{context}: {e}"))
    }
}

impl From<erasim::Error> for CliError {
    fn from(e: erasim::Error) -> Self {
        use erasim::Error as E;
        match e {
            E::Parse(source) => CliError::Parse { path: "<script>".into(), source },
            E::Argument(_) | E::Override { .. } => CliError::Args(e.to_string()),
            E::Precondition(_) | E::SelectionRule { .. } | E::ResourceLimit(_) | E::UnknownBin(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
