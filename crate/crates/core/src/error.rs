use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at position {position}: expected {expected}")]
    SyntaxError { position: usize, expected: String },
    #[error("arity error: expected {expected} entries, found {found}")]
    ArityError { expected: usize, found: usize },
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("unsupported context: {0}")]
    UnsupportedContext(String),
    #[error("integrality violation: {0}")]
    IntegralityViolation(String),
    #[error("context mismatch between operands")]
    ContextMismatch,
    #[error("element has a nonzero constant term")]
    NotInIdeal,
    #[error("truncation order {have} is below the required {need}")]
    TruncationTooLow { have: u32, need: u32 },
    #[error("z-degree {degree} exceeds the bound {bound}")]
    DegreeOverflow { degree: u32, bound: u32 },
    #[error("module has nonzero p^(m+1)-curvature")]
    NonzeroCurvature,
    #[error("validation failure: {0}")]
    ValidationFailure(String),
    #[error("i/o error: {0}")]
    IoError(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::ValidationFailure(msg.into())
}
