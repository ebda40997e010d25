use thiserror::Error;

/// Errors produced by the library. Validation failures carry the name of the
/// first violated invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Invalid(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("size cap exceeded: {0}")]
    Cap(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("flow not optimal: residual network has a negative cycle of cost {0}")]
    NotOptimal(f64),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
