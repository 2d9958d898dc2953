//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by model evaluation, verification, and integration.
#[derive(Debug, Error)]
pub enum PhError {
    /// A position left the admissible open set of the model.
    #[error("position outside admissible domain: {0}")]
    Domain(String),

    /// A user-supplied function returned a value of the wrong shape.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    /// A rank hypothesis (full row rank, expected numerical rank) failed.
    #[error("rank condition violated: {0}")]
    Rank(String),

    /// A point that must satisfy a constraint equation does not.
    #[error("constraint not satisfied: {0}")]
    Constraint(String),

    /// An iterative solve exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {context}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        context: String,
    },

    /// The per-step saddle-point system is numerically singular.
    #[error("singular saddle-point system: {0}")]
    SingularSystem(String),

    /// Invalid model or solver parameter.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Invalid port pairing in an interconnection.
    #[error("invalid port specification: {0}")]
    Port(String),
}

impl PhError {
    pub fn shape(
        context: impl Into<String>,
        expected: impl Into<String>,
        actual: impl Into<String>,
    ) -> Self {
        PhError::Shape {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
