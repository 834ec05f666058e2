use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular matrix encountered in {0}")]
    SingularMatrix(String),
    #[error("matrix is not Hermitian within tolerance (deviation {deviation:.3e}, norm {norm:.3e})")]
    NotHermitian { deviation: f64, norm: f64 },
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("incompatible operands: {0}")]
    IncompatibleOperands(String),
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("no peaks detected in the indicator curve")]
    NoPeaks,
    #[error("linear algebra backend failure in {context}: {message}")]
    Backend { context: String, message: String },
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub fn backend(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        CoreError::Backend {
            context: context.into(),
            message: err.to_string(),
        }
    }
}
