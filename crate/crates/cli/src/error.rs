use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Error raised while building inputs from the scenario.
    pub fn invalid(field: &str, err: guideq::error::Error) -> Self {
        match err {
            guideq::error::Error::Io(msg) => CliError::Io(format!("{field}: {msg}")),
            other => CliError::Validation(format!("{field}: {other}")),
        }
    }
}

impl From<guideq::error::Error> for CliError {
    fn from(err: guideq::error::Error) -> Self {
        match err {
            guideq::error::Error::Io(msg) => CliError::Io(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
