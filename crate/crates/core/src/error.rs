use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    #[error("no crossing found before t_cap = {cap}")]
    CapExceeded { cap: f64 },
    #[error("fixed point not bracketed: {0}")]
    NoBracket(String),
    #[error("iteration budget exhausted: {0}")]
    Convergence(String),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("singular evaluation: {0}")]
    Singularity(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("conditional expectation undefined: {0}")]
    UndefinedConditional(String),
    #[error("unbounded stopping time: {0}")]
    Unbounded(String),
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { message: String, line: usize, column: usize },
    #[error("config schema violation: {0}")]
    Config(String),
    #[error("environment failed validation: {}", .0.summary())]
    InvalidEnvironment(Box<ValidationReport>),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Numeric(_) => "numeric",
            Error::CapExceeded { .. } => "cap-exceeded",
            Error::NoBracket(_) => "no-bracket",
            Error::Convergence(_) => "convergence",
            Error::Domain(_) => "domain",
            Error::Singularity(_) => "singularity",
            Error::Precondition(_) => "precondition",
            Error::UndefinedConditional(_) => "undefined-conditional",
            Error::Unbounded(_) => "unbounded",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::InvalidEnvironment(_) => "invalid-environment",
        }
    }
}
