use thiserror::Error;

use crate::matrix::ComplexMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// An algebraic axiom (closure, ideal property, idempotence) failed.
    #[error("structure error: {0}")]
    Structure(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The map kills a nonzero domain element; `kernel` is a unit-Frobenius witness.
    #[error("map is not injective (kernel vector found)")]
    NotInjective { kernel: ComplexMatrix },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("enumeration refused: {0}")]
    EnumerationRefused(String),

    /// Malformed input document; `line` and `column` are 1-based.
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A well-formed document of the wrong kind for the requested analysis.
    #[error("wrong document kind: {0}")]
    WrongKind(String),
}

impl Error {
    pub(crate) fn dimension(expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
