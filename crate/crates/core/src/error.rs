use blotto_optim::OptimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlottoError {
    /// Input violating a documented invariant; `path` locates the field.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The graph cannot support the requested operation.
    #[error("graph structure: {0}")]
    Structural(String),

    #[error("solver: {0}")]
    Solver(#[from] OptimError),

    /// The LP or MILP did not reach a usable solution.
    #[error("{context}: solver returned {status}")]
    SolverStatus { context: String, status: String },

    /// A configuration with one or more invalid fields.
    #[error("invalid configuration:{}", list(.0))]
    InvalidConfig(Vec<FieldError>),

    #[error("grid of {points} points exceeds the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },
}

/// One invalid field of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

fn list(errs: &[FieldError]) -> String {
    errs.iter().map(|e| format!("\n  {}: {}", e.path, e.message)).collect()
}

impl BlottoError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        BlottoError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, BlottoError>;
