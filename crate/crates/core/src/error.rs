use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("empty database")]
    EmptyDatabase,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("dimension arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("values must not be empty")]
    EmptyValues,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("incompatible knowledge base: {0}")]
    IncompatibleKb(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
