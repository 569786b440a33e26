use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cannot evaluate a negative power at a zero coordinate (variable {var})")]
    ZeroCoordinate { var: usize },

    #[error("dilation matrix is singular")]
    SingularDilation,

    #[error("dilation matrix has |det| = 1; the translation group is trivial")]
    TrivialDilation,

    #[error("invalid dilation matrix: {0}")]
    InvalidDilation(String),

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e} below -{threshold:e}")]
    NotPsd { min_eigenvalue: f64, threshold: f64 },

    #[error("not contractive: largest singular value {norm} exceeds 1 + {tol:e}")]
    NotContractive { norm: f64, tol: f64 },

    #[error("not a hermitian square: {0}")]
    NotASquare(String),

    #[error("verification failed: {what} residual {residual:e} exceeds {tol:e}")]
    Verification { what: String, residual: f64, tol: f64 },

    #[error("nilpotency violated: series did not terminate within {steps} terms")]
    NotNilpotent { steps: usize },

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// True when the error (or the error a failed stage wraps) is a residual
    /// check failing, as opposed to rejected input.
    pub fn is_verification_failure(&self) -> bool {
        match self {
            Error::Verification { .. } | Error::NotNilpotent { .. } => true,
            Error::Stage { source, .. } => source.is_verification_failure(),
            _ => false,
        }
    }

    /// True when the error stems from malformed input rather than from a
    /// mathematical condition failing.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::DimensionMismatch { .. }
            | Error::Shape(_)
            | Error::ZeroCoordinate { .. }
            | Error::SingularDilation
            | Error::TrivialDilation
            | Error::InvalidDilation(_)
            | Error::IndexOutOfRange { .. }
            | Error::Input(_)
            | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
