use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid input data or parameters. The string names the offending key.
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("function and configuration refer to different meshes")]
    MeshMismatch,

    #[error("gradient singularity on element {element}: eps_grad = 0 with exponent below 2 and a zero gradient")]
    Singularity { element: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("singular matrix at row {row}")]
    SingularMatrix { row: usize },

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("solution sample at rho = {rho} is empty: no start converged")]
    EmptySample { rho: f64 },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
