use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl From<qcarpet::Error> for CliError {
    fn from(e: qcarpet::Error) -> Self {
        use qcarpet::Error as E;
        match e {
            E::Domain(_) | E::Config(_) | E::Unsupported(_) => CliError::Validation(e.to_string()),
            E::Io(_) => CliError::Validation(e.to_string()),
            E::Accuracy { .. } | E::Fit(_) | E::Integration { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}
