use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register size error: {0}")]
    Size(String),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("binding error: {0}")]
    Binding(String),
    #[error("arity error: {0}")]
    Arity(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: line {line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 2 for configuration and validation
    /// problems, 3 for runtime I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
