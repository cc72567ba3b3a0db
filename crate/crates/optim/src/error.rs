use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variable {index} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("variable {0} is declared integer but is not bounded within [0, 1]")]
    NonBinaryInteger(usize),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed solution file at line {line}: {message}")]
    SolutionParse { line: usize, message: String },
    #[error("external solver failed: {0}")]
    External(String),
}
