//! Matricial Wasserstein-1 distances.
//!
//! Distances between density matrices (and matrix-valued densities on a
//! one-dimensional grid) are computed from their flux formulation,
//! minimize a sum of nuclear norms subject to a divergence constraint, by
//! Douglas–Rachford splitting. Every result carries a dual potential that is
//! strictly feasible for the Kantorovich–Rubinstein type dual, so the
//! reported duality gap bounds the error of the value.

pub mod config;
pub mod distances;
pub mod error;
mod linalg;
pub mod matrix;
pub mod operators;
pub mod oracle;
pub mod prox;
pub mod solver;
pub mod spectra;

pub use config::{ProjectionMethod, SolverConfig};
pub use error::{Error, Result};
pub use matrix::{
    nuclear_norm, operator_norm, trace_inner, BlockVector, CMat, DensityLikeMatrix,
    HermitianMatrix, SkewHermitianMatrix, Structure, C64,
};
pub use operators::{Boundary, Grid1D, LFamily, MatrixField};
pub use solver::{assemble, solve, Certificate, FluxPoint, Marginals, Params, ProblemKind, ProblemSpec};
pub use distances::{decompose_v1, field_v1, field_w1, metric_audit, v1, w1};
