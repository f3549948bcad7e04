use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("group absent: {0}")]
    GroupAbsent(String),

    #[error("non-finite loss value at observation {index}")]
    NonFiniteLoss { index: usize },

    #[error("csv error at line {line}: {msg}")]
    Csv { line: u64, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("learner did not converge in fold {fold} (last max coefficient change {delta:e})")]
    NonConvergence { fold: usize, delta: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty result: {0}")]
    Empty(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::GroupAbsent(_)
            | Error::NonFiniteLoss { .. }
            | Error::Csv { .. }
            | Error::Io(_) => 2,
            Error::NonConvergence { .. } | Error::Numerical(_) => 3,
            Error::Empty(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
