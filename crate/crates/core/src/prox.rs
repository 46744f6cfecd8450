//! Singular-value thresholding and the exact Euclidean projection onto the
//! structured affine constraint set.
//!
//! Flux variables live in the space of stacked complex matrices regarded as
//! a real vector space. A [`FluxLayout`] groups blocks into the independent
//! nuclear-norm summands of the objective and records each block's
//! structure; projecting onto the structure subspace is a coordinate read
//! (see `matrix::block_coords`), after which the affine correction
//! `x − Kᵀ(KKᵀ)⁺(Kx − b)` runs on flat real coordinates.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::config::ProjectionMethod;
use crate::linalg::left_singular_pairs;
use crate::error::{Error, Result};
use crate::matrix::{block_coords, block_from_coords, c, gram2, gram2_top, CMat, Structure};
use crate::operators::{dot, norm, to_dense, LinearOperator};

/// Proximal map of `tau·‖·‖_*`: soft-thresholds the singular values.
///
/// Stacked flux groups are tall with few columns, so the right singular
/// vectors come from the small Gram matrix `MᴴM = V Σ² Vᴴ` and the result is
/// `M V diag(max(1 − τ/σ, 0)) Vᴴ`. Wide inputs go through their adjoint.
pub fn svt(m: &CMat, tau: f64) -> CMat {
    if tau <= 0.0 || m.is_empty() {
        return m.clone();
    }
    if m.nrows() < m.ncols() {
        return svt(&m.adjoint(), tau).adjoint();
    }
    if m.ncols() == 2 {
        return svt_two_columns(m, tau);
    }
    let eig = SymmetricEigen::new(m.adjoint() * m);
    let n = m.ncols();
    let mut shrink = CMat::zeros(n, n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        // Gram eigenvalues carry relative rounding of a few ulps; values
        // within that of the threshold are treated as thresholded away.
        let s = l.max(0.0).sqrt();
        if s > tau * (1.0 + 1e-12) {
            let v = eig.eigenvectors.column(k);
            shrink += &v * v.adjoint() * c(1.0 - tau / s, 0.0);
        }
    }
    m * shrink
}

// Closed-form `m·f(MᴴM)` for a two-column `m`, `f(λ) = (1 − τ/√λ)₊`, via
// `f(G) = f(λ₂)I + (f(λ₁) − f(λ₂))/(λ₁ − λ₂)·(G − λ₂I)`.
fn svt_two_columns(m: &CMat, tau: f64) -> CMat {
    let (a, d, b) = gram2(m);
    let l1 = gram2_top(a, d, b);
    // Absolute accuracy of λ₂ is all the shrinkage needs.
    let l2 = (a + d - l1).max(0.0);
    let f = |l: f64| {
        let s = l.max(0.0).sqrt();
        if s > tau * (1.0 + 1e-12) { 1.0 - tau / s } else { 0.0 }
    };
    let (f1, f2) = (f(l1), f(l2));
    if f1 == 0.0 {
        return CMat::zeros(m.nrows(), 2);
    }
    if l1 - l2 <= 1e-14 * l1 {
        return m * c(f1, 0.0);
    }
    let slope = (f1 - f2) / (l1 - l2);
    let diag = f2 - slope * l2;
    let (g00, g11, g01) = (slope * a + diag, slope * d + diag, b * slope);
    let mut out = CMat::zeros(m.nrows(), 2);
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, 0)], m[(i, 1)]);
        out[(i, 0)] = x * g00 + y * g01.conj();
        out[(i, 1)] = x * g01 + y * g11;
    }
    out
}

/// Applies [`svt`] with threshold `tau·w_i` to each group independently.
pub fn weighted_group_svt(groups: &[CMat], weights: &[f64], tau: f64) -> Result<Vec<CMat>> {
    if groups.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} groups but {} weights",
            groups.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::InvalidParameter(format!("group weights must be positive, got {w}")));
    }
    Ok(groups
        .iter()
        .zip(weights)
        .map(|(g, w)| svt(g, tau * w))
        .collect())
}

/// One nuclear-norm summand: a stack of structured `n×n` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub tags: Vec<Structure>,
    pub weight: f64,
}

/// Block layout of the flux space.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxLayout {
    n: usize,
    groups: Vec<GroupSpec>,
    offsets: Vec<usize>,
}

impl FluxLayout {
    pub fn new(n: usize, groups: Vec<GroupSpec>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(groups.len() + 1);
        let mut at = 0;
        for g in &groups {
            if g.tags.is_empty() {
                return Err(Error::ShapeMismatch("empty flux group".into()));
            }
            if g.tags.contains(&Structure::General) {
                return Err(Error::InvalidParameter("flux blocks must be hermitian or skew".into()));
            }
            offsets.push(at);
            at += g.tags.len() * n * n;
        }
        offsets.push(at);
        Ok(Self { n, groups, offsets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[GroupSpec] {
        &self.groups
    }

    /// Real dimension of the structured flux space.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn group_range(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.weight).collect()
    }

    pub fn zeros(&self) -> Vec<CMat> {
        self.groups
            .iter()
            .map(|g| CMat::zeros(g.tags.len() * self.n, self.n))
            .collect()
    }

    fn check_shapes(&self, z: &[CMat]) -> Result<()> {
        if z.len() != self.groups.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} flux groups, layout has {}",
                z.len(),
                self.groups.len()
            )));
        }
        for (m, g) in z.iter().zip(&self.groups) {
            if m.nrows() != g.tags.len() * self.n || m.ncols() != self.n {
                return Err(Error::ShapeMismatch(format!(
                    "flux group of shape {:?}, expected {:?}",
                    m.shape(),
                    (g.tags.len() * self.n, self.n)
                )));
            }
        }
        Ok(())
    }

    /// Coordinates of the structure projection of `z`.
    pub(crate) fn coords_into(&self, z: &[CMat], out: &mut [f64]) {
        let d = self.n * self.n;
        for (gi, (m, g)) in z.iter().zip(&self.groups).enumerate() {
            let base = self.offsets[gi];
            for (b, &tag) in g.tags.iter().enumerate() {
                block_coords(m, b * self.n, tag, &mut out[base + b * d..base + (b + 1) * d]);
            }
        }
    }

    pub(crate) fn coords(&self, z: &[CMat]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coords_into(z, &mut out);
        out
    }

    pub(crate) fn from_coords_into(&self, x: &[f64], out: &mut [CMat]) {
        let d = self.n * self.n;
        for (gi, (m, g)) in out.iter_mut().zip(&self.groups).enumerate() {
            let base = self.offsets[gi];
            for (b, &tag) in g.tags.iter().enumerate() {
                block_from_coords(&x[base + b * d..base + (b + 1) * d], tag, m, b * self.n);
            }
        }
    }

    pub(crate) fn from_coords(&self, x: &[f64]) -> Vec<CMat> {
        let mut out = self.zeros();
        self.from_coords_into(x, &mut out);
        out
    }
}

/// Exact solver for `β₁²·(GᵀG ⊗ I) + I ⊗ W` acting on fields of `d` real
/// channels, where `G` is the forward difference of the grid and `W` a fixed
/// `d×d` symmetric matrix.
///
/// `W` is diagonalized once; each of its eigenchannels then needs a
/// (cyclic) tridiagonal solve with `β₁²·GᵀG + μ I`. A channel with `μ = 0`
/// contributes the constant field to the null space; it is solved on the
/// orthogonal complement of the constants.
#[derive(Clone, Debug)]
pub(crate) struct KroneckerGram {
    points: usize,
    periodic: bool,
    /// Off-diagonal magnitude `β₁²/h²` of the spatial stencil.
    a: f64,
    ql: DMatrix<f64>,
    mu: Vec<f64>,
    /// Channels whose constant mode is in the null space.
    null: Vec<usize>,
}

impl KroneckerGram {
    pub(crate) fn new(grid: &crate::operators::Grid1D, spatial_weight: f64, channel: &DMatrix<f64>) -> Self {
        let h = grid.spacing();
        let a = spatial_weight / (h * h);
        let eig = SymmetricEigen::new(channel.clone());
        let mu: Vec<f64> = eig.eigenvalues.iter().map(|m| m.max(0.0)).collect();
        let lmax = 4.0 * a + mu.iter().fold(0.0_f64, |x, &y| x.max(y));
        let null = (0..mu.len()).filter(|&i| mu[i] <= 1e-12 * lmax).collect();
        Self {
            points: grid.len(),
            periodic: grid.boundary() == crate::operators::Boundary::Periodic,
            a,
            ql: eig.eigenvectors,
            mu,
            null,
        }
    }

    /// `r` (point-major, `points × d`) in the channel eigenbasis, channel-major.
    fn to_channels(&self, r: &[f64]) -> Vec<Vec<f64>> {
        let d = self.ql.nrows();
        (0..d)
            .map(|i| {
                let q = self.ql.column(i);
                r.chunks(d).map(|row| row.iter().zip(q.iter()).map(|(x, y)| x * y).sum()).collect()
            })
            .collect()
    }

    fn from_channels(&self, t: &[Vec<f64>], out: &mut [f64]) {
        let d = self.ql.nrows();
        for (k, row) in out.chunks_mut(d).enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..d).map(|i| self.ql[(j, i)] * t[i][k]).sum();
            }
        }
    }

    /// Diagonal of `GᵀG·h²` at point `k`.
    fn stencil_diag(&self, k: usize) -> f64 {
        if !self.periodic && (k == 0 || k + 1 == self.points) {
            1.0
        } else {
            2.0
        }
    }

    /// Solves `(a·GᵀG·h² + μ) y = r` for one channel.
    fn solve_channel(&self, mu: f64, singular: bool, r: &mut [f64]) {
        let m = self.points;
        let a = self.a;
        if m < 4 {
            self.solve_dense(mu, singular, r);
            return;
        }
        if singular {
            // Pin y₀ = 0; the remaining rows form a nonsingular tridiagonal
            // system (the wrap-around couplings all touch node 0).
            let mean = r.iter().sum::<f64>() / m as f64;
            r.iter_mut().for_each(|v| *v -= mean);
            let diag: Vec<f64> = (1..m).map(|k| a * self.stencil_diag(k)).collect();
            let mut y = r[1..].to_vec();
            thomas(-a, &diag, &mut y);
            r[0] = 0.0;
            r[1..].copy_from_slice(&y);
            let mean = r.iter().sum::<f64>() / m as f64;
            r.iter_mut().for_each(|v| *v -= mean);
            return;
        }
        let mut diag: Vec<f64> = (0..m).map(|k| a * self.stencil_diag(k) + mu).collect();
        if !self.periodic {
            thomas(-a, &diag, r);
            return;
        }
        // Cyclic system by Sherman–Morrison: A = T + u vᵀ with corner
        // couplings −a, u = (γ, 0, …, 0, −a), v = (1, 0, …, 0, −a/γ).
        let gamma = -diag[0];
        diag[0] -= gamma;
        diag[m - 1] -= a * a / gamma;
        let mut u = vec![0.0; m];
        u[0] = gamma;
        u[m - 1] = -a;
        thomas(-a, &diag, r);
        thomas(-a, &diag, &mut u);
        let vy = r[0] - a / gamma * r[m - 1];
        let vq = u[0] - a / gamma * u[m - 1];
        let f = vy / (1.0 + vq);
        r.iter_mut().zip(&u).for_each(|(y, q)| *y -= f * q);
    }

    fn solve_dense(&self, mu: f64, singular: bool, r: &mut [f64]) {
        let m = self.points;
        let flux = if self.periodic { m } else { m - 1 };
        let mut g = DMatrix::<f64>::zeros(flux, m);
        for k in 0..flux {
            g[(k, (k + 1) % m)] += 1.0;
            g[(k, k)] -= 1.0;
        }
        let mut a = g.transpose() * g * self.a;
        for k in 0..m {
            a[(k, k)] += mu;
        }
        let eig = SymmetricEigen::new(a);
        let lmax = eig.eigenvalues.iter().fold(0.0_f64, |x, &y| x.max(y));
        let rv = nalgebra::DVector::from_column_slice(r);
        let mut y = nalgebra::DVector::zeros(m);
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            if singular && l <= 1e-12 * lmax.max(4.0 * self.a) {
                continue;
            }
            let q = eig.eigenvectors.column(j);
            y += q * (q.dot(&rv) / l);
        }
        r.copy_from_slice(y.as_slice());
    }

    fn solve(&self, r: &[f64], out: &mut [f64]) {
        let mut t = self.to_channels(r);
        for (i, ch) in t.iter_mut().enumerate() {
            self.solve_channel(self.mu[i], self.null.contains(&i), ch);
        }
        self.from_channels(&t, out);
    }

    /// Norm of the null-space component of `b`.
    fn null_component(&self, b: &[f64]) -> f64 {
        let t = self.to_channels(b);
        let m = self.points as f64;
        self.null
            .iter()
            .map(|&i| t[i].iter().sum::<f64>().powi(2) / m)
            .sum::<f64>()
            .sqrt()
    }

    /// Removes the null-space component of `b` in place.
    fn remove_null(&self, b: &mut [f64]) {
        if self.null.is_empty() {
            return;
        }
        let d = self.ql.nrows();
        let m = self.points as f64;
        let t = self.to_channels(b);
        for &i in &self.null {
            let mean = t[i].iter().sum::<f64>() / m;
            let q = self.ql.column(i);
            for row in b.chunks_mut(d) {
                row.iter_mut().zip(q.iter()).for_each(|(v, qj)| *v -= mean * qj);
            }
        }
    }
}

/// Thomas algorithm for a symmetric tridiagonal system with constant
/// off-diagonal `off`; overwrites `r` with the solution.
fn thomas(off: f64, diag: &[f64], r: &mut [f64]) {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut beta = diag[0];
    r[0] /= beta;
    for k in 1..m {
        c[k] = off / beta;
        beta = diag[k] - off * c[k];
        r[k] = (r[k] - off * r[k - 1]) / beta;
    }
    for k in (0..m - 1).rev() {
        r[k] -= c[k + 1] * r[k + 1];
    }
}

/// How `(KKᵀ)⁺` is applied.
#[derive(Clone, Debug)]
pub(crate) enum GramSolver {
    /// Pseudo-inverse and an orthonormal null-space basis.
    Dense {
        pinv: DMatrix<f64>,
        null: Vec<Vec<f64>>,
    },
    Spectral(KroneckerGram),
    Cg,
}

impl GramSolver {
    pub(crate) fn dense(op: &dyn LinearOperator) -> Self {
        let k = to_dense(op);
        let m = k.nrows();
        // Work from the singular values of K rather than the eigenvalues of
        // KKᵀ so that the null-space threshold sits at 1e-10 relative.
        let pairs = left_singular_pairs(&k);
        let smax = pairs.iter().fold(0.0_f64, |a, p| a.max(p.0));
        let mut pinv = DMatrix::zeros(m, m);
        let mut null = Vec::new();
        for (s, v) in &pairs {
            if *s <= 1e-10 * smax || smax == 0.0 {
                null.push(v.iter().copied().collect());
            } else {
                pinv += v * v.transpose() / (s * s);
            }
        }
        GramSolver::Dense { pinv, null }
    }

    fn null_component(&self, b: &[f64]) -> Option<f64> {
        match self {
            GramSolver::Dense { null, .. } => {
                Some(null.iter().map(|v| dot(v, b).powi(2)).sum::<f64>().sqrt())
            }
            GramSolver::Spectral(k) => Some(k.null_component(b)),
            GramSolver::Cg => None,
        }
    }

    fn remove_null(&self, b: &mut [f64]) {
        match self {
            GramSolver::Dense { null, .. } => {
                for v in null {
                    let p = dot(v, b);
                    b.iter_mut().zip(v).for_each(|(x, y)| *x -= p * y);
                }
            }
            GramSolver::Spectral(k) => k.remove_null(b),
            GramSolver::Cg => {}
        }
    }
}

/// The constraint set `{w : structure(w), K w = b}`.
pub struct AffineSet {
    op: Box<dyn LinearOperator + Send + Sync>,
    rhs: Vec<f64>,
    rhs_norm: f64,
    layout: FluxLayout,
    gram: GramSolver,
    cg_tol: f64,
    cg_max_iter: usize,
}

impl std::fmt::Debug for AffineSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineSet")
            .field("flux_dim", &self.layout.dim())
            .field("codomain_dim", &self.rhs.len())
            .finish_non_exhaustive()
    }
}

/// Relative size of a null-space component of `b` that is still treated
/// as rounding and silently removed.
pub(crate) const NULL_TOLERANCE: f64 = 1e-8;

impl AffineSet {
    /// Builds the set. With an explicit factorization the right-hand side is
    /// checked for consistency (its component in the null space of `Kᵀ` must
    /// be rounding-level) and that component is removed.
    pub(crate) fn new(
        op: Box<dyn LinearOperator + Send + Sync>,
        mut rhs: Vec<f64>,
        layout: FluxLayout,
        gram: GramSolver,
        cg_tol: f64,
        cg_max_iter: Option<usize>,
    ) -> Result<Self> {
        if op.input_dim() != layout.dim() || op.output_dim() != rhs.len() {
            return Err(Error::ShapeMismatch(format!(
                "operator is {}x{}, layout has {} coordinates and rhs {}",
                op.output_dim(),
                op.input_dim(),
                layout.dim(),
                rhs.len()
            )));
        }
        let rhs_norm = norm(&rhs);
        if let Some(null) = gram.null_component(&rhs) {
            if null > NULL_TOLERANCE * rhs_norm.max(f64::MIN_POSITIVE) {
                return Err(Error::SingularConstraint(format!(
                    "right-hand side has a component {null:.3e} outside the range of the constraint operator"
                )));
            }
            gram.remove_null(&mut rhs);
        }
        let cg_max_iter = cg_max_iter.unwrap_or(10 * rhs.len().max(1));
        Ok(Self {
            op,
            rhs_norm: norm(&rhs),
            rhs,
            layout,
            gram,
            cg_tol,
            cg_max_iter,
        })
    }

    /// Convenience constructor choosing the factorization from `method`
    /// (`Auto` and `Spectral` fall back to dense here).
    pub fn from_operator(
        op: Box<dyn LinearOperator + Send + Sync>,
        rhs: Vec<f64>,
        layout: FluxLayout,
        method: ProjectionMethod,
        cg_tol: f64,
    ) -> Result<Self> {
        let gram = match method {
            ProjectionMethod::Cg => GramSolver::Cg,
            _ => GramSolver::dense(op.as_ref()),
        };
        Self::new(op, rhs, layout, gram, cg_tol, None)
    }

    pub fn layout(&self) -> &FluxLayout {
        &self.layout
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn operator(&self) -> &dyn LinearOperator {
        self.op.as_ref()
    }

    pub fn codomain_dim(&self) -> usize {
        self.rhs.len()
    }

    /// Dimension of the range of `K` when a factorization is available.
    pub fn codomain_rank(&self) -> Option<usize> {
        match &self.gram {
            GramSolver::Dense { null, .. } => Some(self.rhs.len() - null.len()),
            GramSolver::Spectral(k) => Some(self.rhs.len() - k.null.len()),
            GramSolver::Cg => None,
        }
    }

    /// Solves `KKᵀ λ = r` on the range of `K`.
    pub(crate) fn gram_solve(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.gram {
            GramSolver::Dense { pinv, .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = pinv.row(i).iter().zip(r).map(|(a, b)| a * b).sum();
                }
                Ok(())
            }
            GramSolver::Spectral(k) => {
                k.solve(r, out);
                Ok(())
            }
            GramSolver::Cg => self.cg(r, out),
        }
    }

    fn cg(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        let m = r.len();
        let mut tmp = vec![0.0; self.layout.dim()];
        let gram = |x: &[f64], y: &mut [f64], tmp: &mut [f64]| {
            self.op.apply_adjoint(x, tmp);
            self.op.apply(tmp, y);
        };
        out.iter_mut().for_each(|v| *v = 0.0);
        let target = (self.cg_tol * self.rhs_norm).max(1e-14 * norm(r)).max(f64::MIN_POSITIVE);
        let mut res = r.to_vec();
        let mut p = res.clone();
        let mut ap = vec![0.0; m];
        let mut rr = dot(&res, &res);
        if rr.sqrt() <= target {
            return Ok(());
        }
        for _ in 0..self.cg_max_iter {
            gram(&p, &mut ap, &mut tmp);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let step = rr / pap;
            for i in 0..m {
                out[i] += step * p[i];
                res[i] -= step * ap[i];
            }
            let next = dot(&res, &res);
            if next.sqrt() <= target {
                return Ok(());
            }
            let beta = next / rr;
            rr = next;
            for i in 0..m {
                p[i] = res[i] + beta * p[i];
            }
        }
        Err(Error::SingularConstraint(format!(
            "conjugate gradient stalled at residual {:.3e} (target {target:.3e})",
            rr.sqrt()
        )))
    }

    /// Projects structured coordinates onto `K x = b` in place.
    pub(crate) fn project_coords(&self, x: &mut [f64]) -> Result<()> {
        let m = self.rhs.len();
        let mut r = vec![0.0; m];
        self.op.apply(x, &mut r);
        r.iter_mut().zip(&self.rhs).for_each(|(a, b)| *a -= b);
        let mut lambda = vec![0.0; m];
        self.gram_solve(&r, &mut lambda)?;
        let mut corr = vec![0.0; x.len()];
        self.op.apply_adjoint(&lambda, &mut corr);
        x.iter_mut().zip(&corr).for_each(|(a, b)| *a -= b);
        Ok(())
    }

    /// Relative constraint residual `‖K x − b‖ / max(‖b‖, 1e-300)`.
    pub(crate) fn residual_coords(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.rhs.len()];
        self.op.apply(x, &mut r);
        r.iter_mut().zip(&self.rhs).for_each(|(a, b)| *a -= b);
        norm(&r) / self.rhs_norm.max(1e-300)
    }

    /// Relative constraint residual of a flux point (after structure projection).
    pub fn residual(&self, z: &[CMat]) -> Result<f64> {
        self.layout.check_shapes(z)?;
        Ok(self.residual_coords(&self.layout.coords(z)))
    }

    /// Euclidean projection of `z` onto the constraint set.
    pub fn project(&self, z: &[CMat]) -> Result<Vec<CMat>> {
        self.layout.check_shapes(z)?;
        let mut x = self.layout.coords(z);
        self.project_coords(&mut x)?;
        // One refinement pass removes the rounding left by the Gram solve.
        self.project_coords(&mut x)?;
        Ok(self.layout.from_coords(&x))
    }
}

/// Projects `z` onto `{w : structure(w), A w = b}`.
pub fn project_affine(z: &[CMat], set: &AffineSet) -> Result<Vec<CMat>> {
    set.project(z)
}
