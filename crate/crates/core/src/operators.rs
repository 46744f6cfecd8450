//! The commutator gradient `∇_L` and its adjoint divergence, the discrete
//! spatial gradient and divergence on one-dimensional grids, and generic
//! real-linear operators.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::right_singular_pairs;
use crate::matrix::{
    block_coords, c, hermitian_from_coords, BlockVector, CMat,
    HermitianMatrix, Structure,
};

/// A real-linear map between flat real coordinate spaces.
pub trait LinearOperator {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Overwrites `y` with `A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Overwrites `x` with `Aᵀ y`.
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]);
}

/// A dense real matrix as an operator.
#[derive(Clone, Debug)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn input_dim(&self) -> usize {
        self.0.ncols()
    }

    fn output_dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let a = &self.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = a.row(i).iter().zip(x).map(|(p, q)| p * q).sum();
        }
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let a = &self.0;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = a.column(j).iter().zip(y).map(|(p, q)| p * q).sum();
        }
    }
}

/// `s·I` on a space of the given dimension.
#[derive(Clone, Copy, Debug)]
pub struct ScaledIdentity {
    pub dim: usize,
    pub scale: f64,
}

impl LinearOperator for ScaledIdentity {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.scale * xi;
        }
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.apply(y, x)
    }
}

/// Materializes an operator as a dense matrix, column by column.
pub fn to_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let (m, p) = (op.output_dim(), op.input_dim());
    let mut out = DMatrix::zeros(m, p);
    let mut e = vec![0.0; p];
    let mut col = vec![0.0; m];
    for j in 0..p {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}

/// Power iteration on `AᵀA` from a seeded random start; stops after 200
/// iterations or once the estimate changes by less than 1e-6 relatively.
pub fn op_norm_estimate(op: &dyn LinearOperator, seed: u64) -> f64 {
    let p = op.input_dim();
    if p == 0 || op.output_dim() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..p).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut x);
    let mut ax = vec![0.0; op.output_dim()];
    let mut ataxx = vec![0.0; p];
    let mut estimate = 0.0_f64;
    for _ in 0..200 {
        op.apply(&x, &mut ax);
        op.apply_adjoint(&ax, &mut ataxx);
        let lambda = norm(&ataxx);
        if lambda == 0.0 {
            return 0.0;
        }
        let next = lambda.sqrt();
        let done = (next - estimate).abs() <= 1e-6 * next;
        estimate = next;
        if done {
            break;
        }
        x.copy_from_slice(&ataxx);
        x.iter_mut().for_each(|v| *v /= lambda);
    }
    estimate
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Result of checking that `ker ∇_L` on Hermitian matrices is `span{I}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    pub nullity: usize,
    pub pass: bool,
    /// Orthonormal basis of the computed kernel.
    pub null_space: Vec<HermitianMatrix>,
    pub largest_singular_value: f64,
}

/// The family `L = [L_1, …, L_N]` defining the commutator gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct LFamily {
    blocks: Vec<HermitianMatrix>,
    kernel: KernelReport,
}

impl LFamily {
    /// Validates the blocks and records the kernel check. A failing kernel
    /// check is not an error here; balanced problems reject it only when the
    /// marginal difference meets the extra kernel directions.
    pub fn new(blocks: Vec<HermitianMatrix>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidParameter("L family must contain at least one matrix".into()));
        };
        let n = first.n();
        if blocks.iter().any(|b| b.n() != n) {
            return Err(Error::ShapeMismatch("all L blocks must share the same size".into()));
        }
        let kernel = kernel_of(&blocks);
        Ok(Self { blocks, kernel })
    }

    pub fn from_real(blocks: &[&[&[f64]]]) -> Result<Self> {
        let hs = blocks
            .iter()
            .map(|rows| HermitianMatrix::from_real_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        Self::new(hs)
    }

    /// The trivial family for scalar (`n = 1`) problems.
    pub fn scalar() -> Self {
        Self::new(vec![HermitianMatrix::identity(1)]).expect("scalar family")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n(&self) -> usize {
        self.blocks[0].n()
    }

    pub fn blocks(&self) -> &[HermitianMatrix] {
        &self.blocks
    }

    pub fn kernel(&self) -> &KernelReport {
        &self.kernel
    }

    /// `U L_k Uᴴ` for every block.
    pub fn conjugate_by(&self, u: &CMat) -> Result<Self> {
        Self::new(self.blocks.iter().map(|b| b.conjugate_by(u)).collect())
    }
}

/// `∇_L f = [L_k f − f L_k]_k`, a block vector of skew-Hermitian blocks.
pub fn grad_l(l: &LFamily, f: &HermitianMatrix) -> Result<BlockVector> {
    if f.n() != l.n() {
        return Err(Error::ShapeMismatch(format!(
            "potential is {}x{}, L blocks are {}x{}",
            f.n(),
            f.n(),
            l.n(),
            l.n()
        )));
    }
    // With L_k and f Hermitian, f L_k = (L_k f)ᴴ; forming D − Dᴴ keeps the
    // output exactly skew-Hermitian in floating point.
    let blocks = l
        .blocks
        .iter()
        .map(|lk| {
            let d = lk.matrix() * f.matrix();
            &d - d.adjoint()
        })
        .collect();
    Ok(BlockVector::from_parts(blocks, vec![Structure::Skew; l.len()]))
}

/// `∇_L* u = Σ_k L_k u_k − u_k L_k`, Hermitian and traceless.
pub fn div_l(l: &LFamily, u: &BlockVector) -> Result<HermitianMatrix> {
    if u.len() != l.len() {
        return Err(Error::ShapeMismatch(format!(
            "flux has {} blocks, L family has {}",
            u.len(),
            l.len()
        )));
    }
    if u.n() != l.n() {
        return Err(Error::ShapeMismatch("flux and L block sizes differ".into()));
    }
    let n = l.n();
    let mut out = CMat::zeros(n, n);
    for (lk, uk) in l.blocks.iter().zip(u.blocks()) {
        let defect = Structure::Skew.defect(uk);
        if defect > crate::matrix::TOL_STRUCT {
            return Err(Error::StructureViolation {
                what: "flux block",
                defect,
                tolerance: crate::matrix::TOL_STRUCT,
            });
        }
        // For skew u_k, −u_k L_k = (L_k u_k)ᴴ.
        let d = lk.matrix() * uk;
        out += &d + d.adjoint();
    }
    HermitianMatrix::new(out)
}

/// Real-linear matrix of `∇_L` from Hermitian coordinates (`n²`) to skew
/// block coordinates (`N·n²`). Its transpose represents `∇_L*`.
pub fn grad_l_matrix(l: &LFamily) -> DMatrix<f64> {
    grad_matrix_of(&l.blocks)
}

fn grad_matrix_of(blocks: &[HermitianMatrix]) -> DMatrix<f64> {
    let n = blocks[0].n();
    let d = n * n;
    let mut out = DMatrix::zeros(blocks.len() * d, d);
    let mut unit = vec![0.0; d];
    let mut col = vec![0.0; d];
    for j in 0..d {
        unit[j] = 1.0;
        let e = hermitian_from_coords(&unit, n);
        for (k, lk) in blocks.iter().enumerate() {
            let p = lk.matrix() * e.matrix();
            let g = &p - p.adjoint();
            block_coords(&g, 0, Structure::Skew, &mut col);
            for (r, v) in col.iter().enumerate() {
                out[(k * d + r, j)] = *v;
            }
        }
        unit[j] = 0.0;
    }
    out
}

fn kernel_of(blocks: &[HermitianMatrix]) -> KernelReport {
    let n = blocks[0].n();
    let a = grad_matrix_of(blocks);
    let pairs = right_singular_pairs(&a);
    let smax = pairs.iter().fold(0.0_f64, |m, p| m.max(p.0));
    let mut null_space = Vec::new();
    for (s, v) in &pairs {
        if *s <= 1e-10 * smax || smax == 0.0 {
            let coords: Vec<f64> = v.iter().copied().collect();
            null_space.push(hermitian_from_coords(&coords, n));
        }
    }
    let nullity = null_space.len();
    KernelReport {
        nullity,
        pass: nullity == 1,
        null_space,
        largest_singular_value: smax,
    }
}

/// Checks the standing kernel assumption for `L`.
pub fn check_kernel(l: &LFamily) -> KernelReport {
    l.kernel.clone()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    ZeroFlux,
}

/// A uniform one-dimensional grid `x_k = k·h`, `k = 0..M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    points: usize,
    spacing: f64,
    boundary: Boundary,
}

impl Grid1D {
    pub fn new(points: usize, spacing: f64, boundary: Boundary) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 points, got {points}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {spacing}")));
        }
        Ok(Self {
            points,
            spacing,
            boundary,
        })
    }

    pub fn periodic(points: usize, spacing: f64) -> Result<Self> {
        Self::new(points, spacing, Boundary::Periodic)
    }

    pub fn zero_flux(points: usize, spacing: f64) -> Result<Self> {
        Self::new(points, spacing, Boundary::ZeroFlux)
    }

    /// Periodic grid over `[0, 2π)` with `h = 2π/M`.
    pub fn circle(points: usize) -> Result<Self> {
        Self::periodic(points, 2.0 * std::f64::consts::PI / points as f64)
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        k as f64 * self.spacing
    }

    /// Number of points carrying a spatial flux / forward difference.
    pub fn flux_len(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.points,
            Boundary::ZeroFlux => self.points - 1,
        }
    }
}

/// Hermitian matrices sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    grid: Grid1D,
    values: Vec<HermitianMatrix>,
}

impl MatrixField {
    pub fn new(grid: Grid1D, values: Vec<HermitianMatrix>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let n = values[0].n();
        if values.iter().any(|v| v.n() != n) {
            return Err(Error::ShapeMismatch("field values must share one size".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl FnMut(usize) -> HermitianMatrix) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(f).collect())
    }

    /// Scalar (`n = 1`) field from real samples.
    pub fn scalar(grid: Grid1D, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Self::new(grid, values.iter().map(|&v| HermitianMatrix::diag(&[v])).collect())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values[0].n()
    }

    /// Quadrature of the trace, `h·Σ_k tr f(x_k)`.
    pub fn mass(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(HermitianMatrix::trace).sum::<f64>()
    }

    /// Checks that every value is positive semidefinite.
    pub fn validate_density(&self) -> Result<()> {
        for v in &self.values {
            crate::matrix::DensityLikeMatrix::new(v.clone())?;
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.scale(s)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid, values)
    }

    /// Inner product `h·Σ_k ⟨a_k, b_k⟩`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        let mut acc = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += crate::matrix::trace_inner(a, b)?.re;
        }
        Ok(self.grid.spacing() * acc)
    }
}

/// Forward difference `(f(x_{k+1}) − f(x_k))/h`, wrapping on periodic
/// grids; zero-flux grids omit the last difference.
pub fn grad_x(f: &MatrixField) -> Vec<HermitianMatrix> {
    let grid = f.grid();
    let m = grid.len();
    let inv_h = c(1.0 / grid.spacing(), 0.0);
    (0..grid.flux_len())
        .map(|k| {
            let next = &f.values()[(k + 1) % m];
            let d = (next.matrix() - f.values()[k].matrix()) * inv_h;
            HermitianMatrix::from_hermitian_part(&d)
        })
        .collect()
}

/// Backward difference, the negative adjoint of [`grad_x`] under the
/// `h`-weighted inner product.
pub fn div_x(u: &[HermitianMatrix], grid: &Grid1D) -> Result<MatrixField> {
    if u.len() != grid.flux_len() {
        return Err(Error::ShapeMismatch(format!(
            "flux field has {} points, grid expects {}",
            u.len(),
            grid.flux_len()
        )));
    }
    let n = u.first().map_or(1, HermitianMatrix::n);
    if u.iter().any(|v| v.n() != n) {
        return Err(Error::ShapeMismatch("flux values must share one size".into()));
    }
    let m = grid.len();
    let inv_h = c(1.0 / grid.spacing(), 0.0);
    let zero = CMat::zeros(n, n);
    let values = (0..m)
        .map(|k| {
            let here = u.get(k).map_or(&zero, |v| v.matrix());
            let prev = match (grid.boundary(), k) {
                (Boundary::Periodic, 0) => u[m - 1].matrix(),
                (Boundary::ZeroFlux, 0) => &zero,
                _ => u[k - 1].matrix(),
            };
            HermitianMatrix::from_hermitian_part(&((here - prev) * inv_h))
        })
        .collect();
    MatrixField::new(*grid, values)
}

/// Converts skew block coordinates back into a block vector.
#[cfg(test)]
pub(crate) fn skew_blocks_from_coords(coords: &[f64], n: usize, count: usize) -> BlockVector {
    let d = n * n;
    let blocks = (0..count)
        .map(|k| {
            let mut m = CMat::zeros(n, n);
            crate::matrix::block_from_coords(&coords[k * d..(k + 1) * d], Structure::Skew, &mut m, 0);
            m
        })
        .collect();
    BlockVector::from_parts(blocks, vec![Structure::Skew; count])
}
