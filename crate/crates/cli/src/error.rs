use thiserror::Error;

/// Errors surfaced by the command layer, each mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<relaxflow::Error> for CliError {
    fn from(e: relaxflow::Error) -> Self {
        use relaxflow::Error as E;
        match e {
            E::Config(m) => CliError::Usage(m),
            E::Linalg(_) | E::Model(_) | E::NonFiniteFeature { .. } => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
