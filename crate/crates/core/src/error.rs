use thiserror::Error;

pub type Result<T, E = GbcsError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbcsError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix entry is not finite: {0}")]
    NonFinite(String),

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("no open-loop Nash equilibrium: boundary matrix is singular (condition estimate {condition:.3e})")]
    NoEquilibrium { condition: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("Riccati solution escapes to infinity near t = {time:.6}")]
    FiniteEscape { time: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal invariant breached: {0}")]
    Invariant(String),
}

impl GbcsError {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        GbcsError::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
