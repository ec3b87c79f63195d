use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<capdelay::Error> for CliError {
    fn from(e: capdelay::Error) -> Self {
        use capdelay::Error as E;
        match e {
            E::Domain { .. } | E::Config(_) => CliError::Config(e.to_string()),
            E::Unstable { .. } | E::Infeasible { .. } | E::NoBracket { .. } => CliError::Infeasible(e.to_string()),
            E::NoConvergence { .. } | E::Inversion { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Infeasible(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Config(_) => 4,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        })
    }
}
