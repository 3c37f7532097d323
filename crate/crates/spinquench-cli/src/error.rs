use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(spinquench::Error),
    #[error("insufficient data: {0}")]
    Insufficient(spinquench::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Insufficient(_) => 4,
        }
    }
}

impl From<spinquench::Error> for CliError {
    fn from(e: spinquench::Error) -> Self {
        use spinquench::Error as E;
        match e {
            E::InsufficientDecay(_) | E::WindowTooShort(_) => CliError::Insufficient(e),
            E::InvalidParameter(_) | E::InvalidGrid(_) | E::IndexOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json: {e}"))
    }
}
