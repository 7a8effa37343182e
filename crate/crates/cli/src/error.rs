use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable inputs or inconsistent settings.
    #[error("{0}")]
    Usage(String),

    /// The registration itself failed.
    #[error("optimizer failed: {0}")]
    Optimizer(jetreg::Error),

    /// A gradcheck check was over its tolerance.
    #[error("check failed: {0}")]
    Check(String),

    #[error("could not write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::Output(_) => ExitCode::from(1),
            CliError::Optimizer(_) => ExitCode::from(2),
            CliError::Check(_) => ExitCode::from(3),
        }
    }
}

impl From<jetreg::Error> for CliError {
    fn from(e: jetreg::Error) -> Self {
        match e {
            jetreg::Error::OrderMismatch { match_order, jet_order } => {
                CliError::Usage(format!("match order exceeds jet order ({match_order} > {jet_order})"))
            }
            jetreg::Error::Io(e) => CliError::Output(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
