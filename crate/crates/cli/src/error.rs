use thiserror::Error;

/// Command failure, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or inputs; exit status 2.
    #[error("{0}")]
    Validation(String),
    /// Anything that went wrong after validation; exit status 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<lrsnmf::Error> for CliError {
    fn from(e: lrsnmf::Error) -> Self {
        use lrsnmf::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::DimensionMismatch { .. }
            | E::Negative { .. }
            | E::NonFinite { .. }
            | E::Parse { .. }
            | E::Report(_) => CliError::Validation(e.to_string()),
            E::Io { .. } | E::Solve { .. } | E::RankDeficient { .. } | E::NonFiniteCost { .. } => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
