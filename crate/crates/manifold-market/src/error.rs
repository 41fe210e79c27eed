//! Error type shared across the library and the CLI.

/// Errors surfaced by geometry, market, dynamics, equilibrium, and config code.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    /// A point, tangent vector, or ambient vector has the wrong length.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A request that has no defined answer (e.g. Laplace cross-term at the median).
    #[error("singular case: {0}")]
    SingularCase(String),

    /// An operation not defined for the given manifold family.
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    /// A numeric estimation failed to reach its stated tolerance.
    #[error("estimation failed: residual {residual:e}")]
    EstimationFailed { residual: f64 },

    /// Non-finite values encountered during iteration or integration.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// Run-configuration parse or validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem trouble while emitting outputs.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
