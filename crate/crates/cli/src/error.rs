use thiserror::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("tolerance failure: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Numerical(_) => 4,
            Self::Tolerance(_) => 5,
        }
    }
}

impl From<grv_core::Error> for CliError {
    fn from(e: grv_core::Error) -> Self {
        use grv_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_) | E::BudgetViolation { .. } => Self::Config(msg),
            E::Numerical(_) | E::StaleTape => Self::Numerical(msg),
            E::Shape(_) | E::NotSymmetric(..) | E::InvalidAdjacency(_) | E::Parse { .. } | E::Io { .. } => {
                Self::Data(msg)
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
