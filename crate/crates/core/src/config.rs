use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `(K Kᵀ)⁺` is applied inside the affine projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    /// Dense pseudo-inverse for matrix problems, spectral solve for fields.
    #[default]
    Auto,
    /// Matrix-free conjugate gradient.
    Cg,
    /// Dense pseudo-inverse (codomain dimension ≤ 2000).
    Dense,
    /// Exact diagonalization of the Kronecker-structured Gram operator
    /// (field problems only).
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative fixed-point residual that triggers a certificate check.
    pub tol_residual: f64,
    /// Relative duality gap, `gap / max(1, value)`, required for convergence.
    pub tol_gap: f64,
    /// Douglas–Rachford prox threshold multiplier.
    pub dr_gamma: f64,
    pub cg_tol: f64,
    /// Defaults to ten times the constraint codomain dimension.
    pub cg_max_iter: Option<usize>,
    pub seed: u64,
    pub projection: ProjectionMethod,
    /// Iterations between duality-gap evaluations.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol_residual: 1e-8,
            tol_gap: 1e-6,
            dr_gamma: 1.0,
            cg_tol: 1e-12,
            cg_max_iter: None,
            seed: 0,
            projection: ProjectionMethod::Auto,
            check_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_residual", self.tol_residual),
            ("tol_gap", self.tol_gap),
            ("dr_gamma", self.dr_gamma),
            ("cg_tol", self.cg_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if self.check_every == 0 {
            return Err(Error::InvalidParameter("check_every must be at least 1".into()));
        }
        if self.cg_max_iter == Some(0) {
            return Err(Error::InvalidParameter("cg_max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tol_gap(mut self, tol_gap: f64) -> Self {
        self.tol_gap = tol_gap;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_projection(mut self, projection: ProjectionMethod) -> Self {
        self.projection = projection;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let cfg = SolverConfig { tol_gap: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig { max_iter: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig { dr_gamma: f64::NAN, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
