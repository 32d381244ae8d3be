use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into two families that callers (the CLI in particular)
/// map to different exit codes: validation problems with the inputs, and
/// numerical failures during a computation.
#[derive(Debug, Error)]
pub enum GlfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("bound computation failed: {0}")]
    BoundFailure(String),

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl GlfError {
    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            GlfError::InvalidArgument(_)
                | GlfError::Capacity(_)
                | GlfError::Unsupported(_)
                | GlfError::Parse { .. }
                | GlfError::Io(_)
        )
    }

    /// Stable snake_case tag used on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            GlfError::InvalidArgument(_) => "invalid_argument",
            GlfError::Capacity(_) => "capacity",
            GlfError::Unsupported(_) => "unsupported",
            GlfError::BoundFailure(_) => "bound_failure",
            GlfError::Conditioning(_) => "conditioning",
            GlfError::Numerical(_) => "numerical",
            GlfError::Parse { .. } => "parse",
            GlfError::Io(_) => "io",
        }
    }

    /// Process exit code: 2 for validation errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            3
        }
    }

    /// Rebuild an error from its wire tag. Unknown tags become `Numerical`.
    pub fn from_kind(kind: &str, message: String) -> Self {
        match kind {
            "invalid_argument" | "parse" | "io" => GlfError::InvalidArgument(message),
            "capacity" => GlfError::Capacity(message),
            "unsupported" => GlfError::Unsupported(message),
            "bound_failure" => GlfError::BoundFailure(message),
            "conditioning" => GlfError::Conditioning(message),
            _ => GlfError::Numerical(message),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        GlfError::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, GlfError>;
