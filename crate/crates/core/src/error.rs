use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent model, program, domain spec or query input.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("constraint not grounded: {0}")]
    NotGrounded(String),

    #[error("not count-normalized: {0}")]
    NotCountNormalized(String),

    #[error("constraints misaligned: {0}")]
    Misaligned(String),

    #[error("not liftable: {0}")]
    NotLiftable(String),

    #[error("shatter first: {0}")]
    ShatterFirst(String),

    #[error("missing domain for logvar {0}")]
    MissingDomain(String),

    #[error("atom {0} does not occur in the model")]
    UnknownAtom(String),

    #[error("inconsistent evidence: normalization constant is zero")]
    InconsistentEvidence,

    #[error("invalid constraint world: {0}")]
    InvalidConstraintWorld(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// `true` for errors caused by user input, as opposed to failures during inference.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NotCountNormalized(_)
                | Error::NotLiftable(_)
                | Error::Misaligned(_)
                | Error::ShatterFirst(_)
                | Error::InconsistentEvidence
        )
    }
}
