use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Error)]
pub enum AirError {
    /// Two arrays that must conform do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A scalar or structural argument is outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The selected loss cannot be evaluated on this label layout,
    /// e.g. softmax on multi-label data.
    #[error("unsupported loss: {0}")]
    UnsupportedLoss(String),

    /// An iterative solver produced non-finite state or a residual that
    /// grew by more than six orders of magnitude.
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    /// A binary file did not start with the expected magic bytes.
    #[error("{path}: wrong magic, expected {expected}, found {found}")]
    WrongMagic {
        path: String,
        expected: String,
        found: String,
    },

    /// A binary file ended before its header said it would.
    #[error("{path}: truncated, {detail}")]
    Truncated { path: String, detail: String },

    /// Paired files disagree on how many examples they hold.
    #[error("count mismatch: {left_path} has {left} examples, {right_path} has {right}")]
    CountMismatch {
        left_path: String,
        left: usize,
        right_path: String,
        right: usize,
    },

    /// A text file (CSV features or labels) failed to parse.
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AirError>;

impl AirError {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl Into<String>,
        actual: impl Into<String>,
    ) -> Self {
        AirError::DimensionMismatch {
            context,
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AirError::InvalidInput(msg.into())
    }
}
