use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing prerequisite: {0}")]
    Prerequisite(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("estimation error: {0}")]
    Estimation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Prerequisite(_) => 3,
            CliError::Io(_) => 4,
            CliError::Estimation(_) => 5,
        }
    }
}

impl From<voshm_core::error::Error> for CliError {
    fn from(e: voshm_core::error::Error) -> Self {
        use voshm_core::error::Error as E;
        match e {
            E::Config(_) | E::ModelValidity(_) => CliError::Config(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Estimation(e.to_string()),
        }
    }
}
