use thiserror::Error;

/// Errors raised by the matrix containers, operators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input data does not have the claimed matrix structure.
    #[error("{what}: structural defect {defect:.3e} exceeds tolerance {tolerance:.3e}")]
    StructureViolation {
        what: &'static str,
        defect: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e} (tolerance {tolerance:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A balanced problem was requested for marginals of unequal mass.
    #[error("total masses differ ({mass0} vs {mass1}); use the unbalanced distance (v1) instead")]
    TraceMismatch { mass0: f64, mass1: f64 },

    /// The gradient family has a kernel larger than the identity and the
    /// requested marginal difference has a component in it.
    #[error("the L family has kernel dimension {nullity} and the marginal difference is not orthogonal to it")]
    KernelViolation { nullity: usize },

    #[error("constraint system is singular or inconsistent: {0}")]
    SingularConstraint(String),

    #[error("solver did not converge: gap {gap:.3e} after {iterations} iterations")]
    NotConverged { gap: f64, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
