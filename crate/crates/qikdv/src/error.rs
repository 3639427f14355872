use thiserror::Error;

/// Unified error type for the toolkit. Exit-code mapping lives in the CLI:
/// validation errors are 2, numerical failures 3, I/O 4.
#[derive(Debug, Error)]
pub enum QiError {
    #[error("validation: {0}")]
    Validation(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("blow-up at t = {t}: {detail}")]
    BlowUp { t: f64, detail: String },

    #[error("singular gauge coefficient at x = {x}")]
    Singular { x: f64 },

    #[error("algebra grade overflow: grade {grade} outside window [{min}, {max}]")]
    GradeOverflow { grade: i64, min: i64, max: i64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QiError>;

impl QiError {
    pub fn validation(msg: impl Into<String>) -> Self {
        QiError::Validation(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        QiError::Domain(msg.into())
    }

    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            QiError::Validation(_) | QiError::Parse(_) => 2,
            QiError::Domain(_)
            | QiError::BlowUp { .. }
            | QiError::Singular { .. }
            | QiError::GradeOverflow { .. } => 3,
            QiError::Io(_) => 4,
        }
    }
}
