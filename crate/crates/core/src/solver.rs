//! Assembly of the four transport problems and their Douglas–Rachford
//! solution with a duality-gap certificate.
//!
//! Every problem has the form
//!
//! ```text
//!   minimize  h · Σ_g w_g ‖x_g‖_*   subject to  K P(x) = b,
//! ```
//!
//! where, at every grid point `x_k` (a single point for matrix problems),
//!
//! ```text
//!   (K x)_k = β₁ (Gᵀ u₁)_k + β₂ ∇_L* u₂(x_k) + v(x_k),    b_k = ρ₀(x_k) − ρ₁(x_k).
//! ```
//!
//! `G` is the forward difference, so `Gᵀ = −div_x` and the constraint is
//! `ρ₀ − ρ₁ + β₁ div_x u₁ − β₂ ∇_L* u₂ − v = 0`. Balanced problems drop `v`,
//! matrix problems drop `u₁`, and `n = 1` problems drop `u₂` (the commutator
//! vanishes identically). The dual is `max h⟨f, b⟩` subject to
//! `‖(Kᵀ f)_g‖ ≤ w_g` for every group.
//!
//! The flux blocks are arbitrary complex matrices and `P` takes the
//! Hermitian part of `u₁` and `v` and the skew-Hermitian part of each `u₂`
//! block, so `K P` is exactly the real adjoint of `f ↦ Kᵀ f` into the full
//! block space and the dual above is its conic dual with zero gap. Forcing
//! the structure on the flux itself changes nothing for single-block groups
//! (the projection does not increase the nuclear norm) but for stacked
//! groups it can raise the primal value strictly above the dual.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{ProjectionMethod, SolverConfig};
use crate::error::{Error, Result};
use crate::matrix::{
    block_coords, hermitian_from_coords, nuclear_norm, operator_norm, BlockVector, CMat, HermitianMatrix,
    Structure,
};
use crate::operators::{dot, grad_l_matrix, norm, Grid1D, LFamily, LinearOperator, MatrixField};
use crate::prox::{svt, AffineSet, FluxLayout, GramSolver, GroupSpec, KroneckerGram, NULL_TOLERANCE};

/// Relative trace (or integrated trace) mismatch tolerated by balanced kinds.
pub const TRACE_TOLERANCE: f64 = 1e-9;

/// Frobenius norm of `ρ₀ − ρ₁` below which the zero certificate is returned.
const DEGENERATE: f64 = 1e-14;

/// Largest codomain for an explicitly requested dense factorization.
const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    BalancedMatrix,
    UnbalancedMatrix,
    BalancedField,
    UnbalancedField,
}

impl ProblemKind {
    pub fn is_balanced(self) -> bool {
        matches!(self, Self::BalancedMatrix | Self::BalancedField)
    }

    pub fn is_field(self) -> bool {
        matches!(self, Self::BalancedField | Self::UnbalancedField)
    }
}

/// Source weight `α` and the translation/rotation weights `β₁`, `β₂`.
/// Parameters a kind does not use are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { alpha: 1.0, beta1: 1.0, beta2: 1.0 }
    }
}

impl Params {
    pub fn alpha(alpha: f64) -> Self {
        Self { alpha, ..Self::default() }
    }

    pub fn field(alpha: f64, beta1: f64, beta2: f64) -> Self {
        Self { alpha, beta1, beta2 }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// The pair of marginals being compared.
#[derive(Clone, Debug, PartialEq)]
pub enum Marginals {
    Matrix { rho0: HermitianMatrix, rho1: HermitianMatrix },
    Field { rho0: MatrixField, rho1: MatrixField },
}

/// Coordinate offsets of a grid point's flux blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Slots {
    /// Indices of the transport and source groups.
    transport: Option<usize>,
    source: Option<usize>,
    u1: Option<usize>,
    u2: Option<usize>,
    v: Option<usize>,
}

/// `K` from the module documentation, on structured real coordinates.
#[derive(Clone, Debug)]
struct ConstraintOperator {
    d: usize,
    slots: Vec<Slots>,
    /// `∇_L` as a real matrix (`N·n² × n²`), absent when `u₂` is dropped.
    grad_l: Option<DMatrix<f64>>,
    n_l: usize,
    beta1: f64,
    beta2: f64,
    inv_h: f64,
    input_dim: usize,
}

impl LinearOperator for ConstraintOperator {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.slots.len() * self.d
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (d, m) = (self.d, self.slots.len());
        y.iter_mut().for_each(|v| *v = 0.0);
        let s1 = self.beta1 * self.inv_h;
        for (k, slot) in self.slots.iter().enumerate() {
            if let Some(o) = slot.u1 {
                let next = (k + 1) % m;
                for i in 0..d {
                    let val = s1 * x[o + i];
                    y[k * d + i] -= val;
                    y[next * d + i] += val;
                }
            }
            if let (Some(o), Some(g)) = (slot.u2, &self.grad_l) {
                let u = &x[o..o + self.n_l * d];
                for i in 0..d {
                    let acc: f64 = g.column(i).iter().zip(u).map(|(a, b)| a * b).sum();
                    y[k * d + i] += self.beta2 * acc;
                }
            }
            if let Some(o) = slot.v {
                for i in 0..d {
                    y[k * d + i] += x[o + i];
                }
            }
        }
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let (d, m) = (self.d, self.slots.len());
        let s1 = self.beta1 * self.inv_h;
        for (k, slot) in self.slots.iter().enumerate() {
            let yk = &y[k * d..(k + 1) * d];
            if let Some(o) = slot.u1 {
                let next = (k + 1) % m;
                for i in 0..d {
                    x[o + i] = s1 * (y[next * d + i] - yk[i]);
                }
            }
            if let (Some(o), Some(g)) = (slot.u2, &self.grad_l) {
                for r in 0..self.n_l * d {
                    x[o + r] = self.beta2 * g.row(r).iter().zip(yk).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            if let Some(o) = slot.v {
                x[o..o + d].copy_from_slice(yk);
            }
        }
    }
}

/// An assembled primal problem.
#[derive(Debug)]
pub struct ProblemSpec {
    kind: ProblemKind,
    params: Params,
    l: LFamily,
    grid: Option<Grid1D>,
    n: usize,
    slots: Vec<Slots>,
    layout: FluxLayout,
    /// Right-hand side in Hermitian coordinates, point-major, after removal
    /// of the (rounding-level) component outside the range of `K`.
    rhs: Vec<f64>,
    /// `None` for the degenerate zero problem.
    set: Option<AffineSet>,
    /// Largest group norm of the least-norm feasible flux.
    scale: f64,
}

/// Builds the constraint system for `kind`.
pub fn assemble(
    kind: ProblemKind,
    marginals: &Marginals,
    l: &LFamily,
    params: Params,
    config: &SolverConfig,
) -> Result<ProblemSpec> {
    params.validate()?;
    config.validate()?;
    let params = match kind {
        ProblemKind::BalancedMatrix => Params::default(),
        ProblemKind::UnbalancedMatrix => Params { alpha: params.alpha, ..Params::default() },
        ProblemKind::BalancedField => Params { alpha: 1.0, ..params },
        ProblemKind::UnbalancedField => params,
    };
    let (grid, diffs, mass0, mass1) = match (marginals, kind.is_field()) {
        (Marginals::Matrix { rho0, rho1 }, false) => {
            if rho0.n() != rho1.n() {
                return Err(Error::ShapeMismatch("marginals differ in size".into()));
            }
            (None, vec![rho0.sub(rho1)?], rho0.trace(), rho1.trace())
        }
        (Marginals::Field { rho0, rho1 }, true) => {
            let diff = rho0.sub(rho1)?;
            (Some(*rho0.grid()), diff.values().to_vec(), rho0.mass(), rho1.mass())
        }
        (Marginals::Matrix { .. }, true) => {
            return Err(Error::ShapeMismatch("field problem given matrix marginals".into()))
        }
        (Marginals::Field { .. }, false) => {
            return Err(Error::ShapeMismatch("matrix problem given field marginals".into()))
        }
    };
    let n = diffs[0].n();
    if l.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "marginals are {n}x{n}, L blocks are {}x{}",
            l.n(),
            l.n()
        )));
    }
    if kind.is_balanced() {
        let scale = mass0.abs().max(mass1.abs());
        if (mass0 - mass1).abs() > TRACE_TOLERANCE * scale {
            return Err(Error::TraceMismatch { mass0, mass1 });
        }
    }

    let d = n * n;
    let points = diffs.len();
    let mut rhs = vec![0.0; points * d];
    for (k, v) in diffs.iter().enumerate() {
        block_coords(v.matrix(), 0, Structure::Hermitian, &mut rhs[k * d..(k + 1) * d]);
    }
    if kind.is_balanced() {
        remove_balanced_null(&mut rhs, n, l)?;
    }

    // Flux layout: transport groups for every point, then source groups.
    let use_l = n > 1;
    let flux_len = grid.map_or(0, |g: Grid1D| g.flux_len());
    let mut groups = Vec::new();
    let mut slots = vec![Slots::default(); points];
    let mut at = 0;
    for (k, slot) in slots.iter_mut().enumerate() {
        let mut tags = Vec::new();
        if k < flux_len {
            slot.u1 = Some(at);
            tags.push(Structure::Hermitian);
            at += d;
        }
        if use_l {
            slot.u2 = Some(at);
            tags.extend(std::iter::repeat(Structure::Skew).take(l.len()));
            at += l.len() * d;
        }
        if !tags.is_empty() {
            slot.transport = Some(groups.len());
            groups.push(GroupSpec { tags, weight: 1.0 });
        }
    }
    if !kind.is_balanced() {
        for slot in slots.iter_mut() {
            slot.v = Some(at);
            at += d;
            slot.source = Some(groups.len());
            groups.push(GroupSpec { tags: vec![Structure::Hermitian], weight: params.alpha });
        }
    }
    let layout = FluxLayout::new(n, groups)?;

    let mut problem = ProblemSpec {
        kind,
        params,
        l: l.clone(),
        grid,
        n,
        slots: slots.clone(),
        layout: layout.clone(),
        rhs: rhs.clone(),
        set: None,
        scale: 0.0,
    };
    if norm(&rhs) <= DEGENERATE || layout.dim() == 0 {
        return Ok(problem);
    }

    let op = ConstraintOperator {
        d,
        slots,
        grad_l: use_l.then(|| grad_l_matrix(l)),
        n_l: l.len(),
        beta1: params.beta1,
        beta2: params.beta2,
        inv_h: grid.map_or(1.0, |g| 1.0 / g.spacing()),
        input_dim: layout.dim(),
    };
    let gram = match (config.projection, grid) {
        (ProjectionMethod::Cg, _) => GramSolver::Cg,
        (ProjectionMethod::Auto, None) => GramSolver::dense(&op),
        (ProjectionMethod::Dense, _) => {
            if rhs.len() > DENSE_LIMIT {
                return Err(Error::InvalidParameter(format!(
                    "dense projection limited to codomain dimension {DENSE_LIMIT}, problem has {}",
                    rhs.len()
                )));
            }
            GramSolver::dense(&op)
        }
        (ProjectionMethod::Spectral, None) => {
            return Err(Error::InvalidParameter("spectral projection applies to field problems only".into()))
        }
        (ProjectionMethod::Auto | ProjectionMethod::Spectral, Some(g)) => {
            let mut channel = match &op.grad_l {
                Some(gl) => gl.transpose() * gl * (params.beta2 * params.beta2),
                None => DMatrix::zeros(d, d),
            };
            if !kind.is_balanced() {
                channel += DMatrix::identity(d, d);
            }
            GramSolver::Spectral(KroneckerGram::new(&g, params.beta1 * params.beta1, &channel))
        }
    };
    let set = AffineSet::new(Box::new(op), rhs, layout, gram, config.cg_tol, config.cg_max_iter)?;
    problem.rhs = set.rhs().to_vec();

    let mut least = vec![0.0; set.layout().dim()];
    set.project_coords(&mut least)?;
    problem.scale = set
        .layout()
        .groups()
        .iter()
        .enumerate()
        .map(|(g, _)| norm(&least[set.layout().group_range(g)]))
        .fold(0.0_f64, f64::max);
    problem.set = Some(set);
    Ok(problem)
}

/// Removes the identity (mass) component of a balanced right-hand side and
/// rejects any component along the extra kernel directions of `∇_L`.
///
/// For fields the null space of `Kᵀ` consists of constant fields with values
/// in `ker ∇_L`, so the relevant component is that of the point sum.
fn remove_balanced_null(rhs: &mut [f64], n: usize, l: &LFamily) -> Result<()> {
    let d = n * n;
    let points = rhs.len() / d;
    let total = norm(rhs);
    let sqrt_m = (points as f64).sqrt();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    let mut identity = vec![0.0; d];
    identity[..n].iter_mut().for_each(|v| *v = 1.0 / (n as f64).sqrt());
    directions.push(identity.clone());
    let check_l = n > 1 && !l.kernel().pass;
    if check_l {
        // Orthonormalize the kernel basis against the identity.
        for h in &l.kernel().null_space {
            let mut v = vec![0.0; d];
            block_coords(h.matrix(), 0, Structure::Hermitian, &mut v);
            for q in &directions {
                let p = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|a| *a /= nv);
                directions.push(v);
            }
        }
    }
    let mut sum = vec![0.0; d];
    for chunk in rhs.chunks(d) {
        sum.iter_mut().zip(chunk).for_each(|(a, b)| *a += b);
    }
    let mut extra = 0.0;
    for (idx, q) in directions.iter().enumerate() {
        // Component of rhs along the unit constant field with value q.
        let p = dot(q, &sum) / sqrt_m;
        if idx > 0 {
            extra += p * p;
        }
        for chunk in rhs.chunks_mut(d) {
            chunk.iter_mut().zip(q).for_each(|(a, b)| *a -= p / sqrt_m * b);
        }
    }
    if extra.sqrt() > NULL_TOLERANCE * total.max(f64::MIN_POSITIVE) {
        return Err(Error::KernelViolation { nullity: l.kernel().nullity });
    }
    Ok(())
}

impl ProblemSpec {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn params(&self) -> Params {
        self.params
    }

    pub fn l_family(&self) -> &LFamily {
        &self.l
    }

    pub fn grid(&self) -> Option<&Grid1D> {
        self.grid.as_ref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid points (1 for matrix problems).
    pub fn points(&self) -> usize {
        self.slots.len()
    }

    pub fn layout(&self) -> &FluxLayout {
        &self.layout
    }

    /// Number of nuclear-norm summands.
    pub fn group_count(&self) -> usize {
        self.layout.groups().len()
    }

    /// Real dimension of the constraint codomain (`points · n²`).
    pub fn codomain_dim(&self) -> usize {
        self.rhs.len()
    }

    /// Rank of `K` when a factorization is available.
    pub fn codomain_rank(&self) -> Option<usize> {
        self.set.as_ref().and_then(|s| s.codomain_rank())
    }

    /// Quadrature weight multiplying the objective (1 for matrix problems).
    pub fn spacing(&self) -> f64 {
        self.grid.map_or(1.0, |g| g.spacing())
    }

    /// True when the marginals coincide and the zero certificate is exact.
    pub fn is_trivial(&self) -> bool {
        self.set.is_none()
    }

    pub fn affine_set(&self) -> Option<&AffineSet> {
        self.set.as_ref()
    }

    /// Objective `h · Σ_g w_g ‖x_g‖_*` of a flux in the certificate format.
    pub fn objective(&self, flux: &[FluxPoint]) -> Result<f64> {
        Ok(self.spacing() * objective(&self.layout, &self.flux_to_groups(flux)?))
    }

    /// Relative constraint residual of a flux in the certificate format.
    pub fn residual(&self, flux: &[FluxPoint]) -> Result<f64> {
        let x = self.layout.coords(&self.flux_to_groups(flux)?);
        Ok(match &self.set {
            Some(set) => set.residual_coords(&x),
            None => norm(&x),
        })
    }

    fn flux_from_groups(&self, groups: &[CMat]) -> Vec<FluxPoint> {
        let (n, nl) = (self.n, self.l.len());
        let rows = |m: &CMat, r: usize| m.rows(r * n, n).into_owned();
        self.slots
            .iter()
            .map(|s| {
                let t = s.transport.map(|g| &groups[g]);
                let skip = usize::from(s.u1.is_some());
                FluxPoint {
                    spatial: s.u1.and(t).map(|m| rows(m, 0)),
                    rotational: s.u2.and(t).map(|m| {
                        let tag = if skip == 0 && nl == 1 { Structure::Skew } else { Structure::General };
                        BlockVector::from_parts((0..nl).map(|b| rows(m, skip + b)).collect(), vec![tag; nl])
                    }),
                    source: s.source.map(|g| HermitianMatrix::from_hermitian_part(&groups[g])),
                }
            })
            .collect()
    }

    fn flux_to_groups(&self, flux: &[FluxPoint]) -> Result<Vec<CMat>> {
        if flux.len() != self.slots.len() {
            return Err(Error::ShapeMismatch(format!(
                "flux has {} points, problem has {}",
                flux.len(),
                self.slots.len()
            )));
        }
        let n = self.n;
        let mut groups = self.layout.zeros();
        let mismatch = || Error::ShapeMismatch("flux blocks do not match the problem layout".into());
        for (p, s) in flux.iter().zip(&self.slots) {
            let skip = usize::from(s.u1.is_some());
            match (s.u1, &p.spatial) {
                (Some(_), Some(m)) if m.shape() == (n, n) => {
                    groups[s.transport.expect("u1 lives in a transport group")].rows_mut(0, n).copy_from(m)
                }
                (None, None) => {}
                _ => return Err(mismatch()),
            }
            match (s.u2, &p.rotational) {
                (Some(_), Some(u)) if u.len() == self.l.len() && u.n() == n => {
                    let g = &mut groups[s.transport.expect("u2 lives in a transport group")];
                    for (b, blk) in u.blocks().iter().enumerate() {
                        g.rows_mut((skip + b) * n, n).copy_from(blk);
                    }
                }
                (None, None) => {}
                _ => return Err(mismatch()),
            }
            match (s.source, &p.source) {
                (Some(g), Some(h)) if h.n() == n => groups[g].copy_from(h.matrix()),
                (None, None) => {}
                _ => return Err(mismatch()),
            }
        }
        Ok(groups)
    }

    fn potential_from_coords(&self, f: &[f64]) -> Vec<HermitianMatrix> {
        let d = self.n * self.n;
        f.chunks(d).map(|c| hermitian_from_coords(c, self.n)).collect()
    }
}

/// Flux blocks at one grid point; absent components are `None`.
///
/// Only the Hermitian part of `spatial` and the skew-Hermitian part of each
/// `rotational` block enter the constraint (see the module documentation).
/// When a transport group is a single block it is returned structured.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxPoint {
    /// `u₁(x_k)`, the spatial (translation) flux.
    pub spatial: Option<CMat>,
    /// `u₂(x_k)` (or `u` for matrix problems), the commutator flux.
    pub rotational: Option<BlockVector>,
    /// The source term `v(x_k)`.
    pub source: Option<HermitianMatrix>,
}

/// Primal–dual pair certifying a computed value.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: ProblemKind,
    pub params: Params,
    /// Objective of the returned (feasible) flux; an upper bound.
    pub primal_value: f64,
    /// Objective of the returned (feasible) potential; a lower bound.
    pub dual_value: f64,
    pub gap: f64,
    pub flux: Vec<FluxPoint>,
    /// Dual potential `f`, one matrix per grid point.
    pub potential: Vec<HermitianMatrix>,
    /// Relative constraint residual of `flux`.
    pub residual: f64,
    /// Relative Douglas–Rachford fixed-point residual at exit.
    pub fixed_point_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Certificate {
    pub fn value(&self) -> f64 {
        self.primal_value
    }

    /// `gap / max(1, value)`.
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.primal_value.max(1.0)
    }
}

/// The Douglas–Rachford iterate, reusable as a warm start for problems with
/// the same layout (e.g. an `α` sweep).
#[derive(Clone, Debug, PartialEq)]
pub struct DrState {
    z: Vec<CMat>,
    gamma: f64,
}

/// Solves from `z = 0`.
pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<Certificate> {
    solve_from(problem, config, None).map(|(cert, _)| cert)
}

/// Solves starting from `start` when given (ignored if its shape differs).
pub fn solve_from(
    problem: &ProblemSpec,
    config: &SolverConfig,
    start: Option<&DrState>,
) -> Result<(Certificate, DrState)> {
    config.validate()?;
    let Some(set) = &problem.set else {
        return Ok((zero_certificate(problem), DrState { z: problem.layout.zeros(), gamma: 0.0 }));
    };
    let layout = &problem.layout;
    let weights = layout.weights();
    let gamma = config.dr_gamma * problem.scale;
    let h = problem.spacing();

    let mut z = match start {
        Some(s) if same_shape(&s.z, layout) => s.z.clone(),
        _ => layout.zeros(),
    };
    let mut x = layout.zeros();
    let mut t = layout.zeros();

    let mut best_primal = f64::INFINITY;
    let mut best_flux = layout.zeros();
    let mut best_dual = f64::NEG_INFINITY;
    let mut best_f = vec![0.0; set.rhs().len()];
    let mut fixed_point = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    let mut corrector = Corrector::new(layout, set);
    let mut evaluate = |x: &[CMat],
                    z: &[CMat],
                    best_primal: &mut f64,
                    best_flux: &mut Vec<CMat>,
                    best_dual: &mut f64,
                    best_f: &mut Vec<f64>|
     -> Result<f64> {
        let mut w = x.to_vec();
        let moved = corrector.apply(&mut w)?;
        let xn: f64 = x.iter().map(|a| a.norm_squared()).sum();
        let fp = moved / (1.0 + xn.sqrt());
        let primal = objective(layout, &w);
        if primal < *best_primal {
            *best_primal = primal;
            *best_flux = w;
        }
        let (f, dual) = dual_from(problem, set, x, z, gamma)?;
        if dual > *best_dual {
            *best_dual = dual;
            *best_f = f;
        }
        Ok(fp)
    };

    let mut step = Corrector::new(layout, set);
    while iterations < config.max_iter {
        for ((xg, zg), w) in x.iter_mut().zip(&z).zip(&weights) {
            *xg = svt(zg, gamma * w);
        }
        iterations += 1;
        if iterations % config.check_every == 0 || iterations == config.max_iter {
            fixed_point = evaluate(&x, &z, &mut best_primal, &mut best_flux, &mut best_dual, &mut best_f)?;
            let gap = h * (best_primal - best_dual);
            if gap <= config.tol_gap * (h * best_primal).max(1.0) {
                converged = true;
                break;
            }
        }
        for ((tg, xg), zg) in t.iter_mut().zip(&x).zip(&z) {
            tg.zip_zip_apply(xg, zg, |t, x, z| *t = x + x - z);
        }
        step.apply(&mut t)?;
        for ((zg, tg), xg) in z.iter_mut().zip(&t).zip(&x) {
            zg.zip_zip_apply(tg, xg, |z, t, x| *z += t - x);
        }
    }

    // Single-block groups lose nothing by taking their structured part.
    for (g, spec) in best_flux.iter_mut().zip(layout.groups()) {
        if let [tag] = spec.tags[..] {
            *g = tag.project(g);
        }
    }
    let best_primal = best_primal.min(objective(layout, &best_flux));
    let residual = set.residual_coords(&layout.coords(&best_flux));
    let converged = converged && residual <= config.tol_residual;
    let cert = Certificate {
        kind: problem.kind,
        params: problem.params,
        primal_value: h * best_primal,
        dual_value: h * best_dual,
        gap: h * (best_primal - best_dual),
        flux: problem.flux_from_groups(&best_flux),
        potential: problem.potential_from_coords(&best_f),
        residual,
        fixed_point_residual: fixed_point,
        iterations,
        converged,
    };
    Ok((cert, DrState { z, gamma }))
}

/// Projects `t` onto `{u : K (structured part of u) = b}` in place; the
/// correction only touches the structured part.
struct Corrector<'a> {
    layout: &'a FluxLayout,
    set: &'a AffineSet,
    before: Vec<f64>,
    after: Vec<f64>,
    delta: Vec<CMat>,
}

impl<'a> Corrector<'a> {
    fn new(layout: &'a FluxLayout, set: &'a AffineSet) -> Self {
        Self { layout, set, before: vec![0.0; layout.dim()], after: vec![0.0; layout.dim()], delta: layout.zeros() }
    }

    /// Returns the norm of the correction.
    fn apply(&mut self, t: &mut [CMat]) -> Result<f64> {
        self.layout.coords_into(t, &mut self.before);
        self.after.copy_from_slice(&self.before);
        self.set.project_coords(&mut self.after)?;
        self.after.iter_mut().zip(&self.before).for_each(|(a, b)| *a -= b);
        self.layout.from_coords_into(&self.after, &mut self.delta);
        t.iter_mut().zip(&self.delta).for_each(|(a, d)| *a += d);
        Ok(norm(&self.after))
    }
}

fn objective(layout: &FluxLayout, w: &[CMat]) -> f64 {
    w.iter().zip(layout.groups()).map(|(m, g)| g.weight * nuclear_norm(m)).sum()
}

fn same_shape(z: &[CMat], layout: &FluxLayout) -> bool {
    let zeros = layout.zeros();
    z.len() == zeros.len() && z.iter().zip(&zeros).all(|(a, b)| a.shape() == b.shape())
}

/// Dual potential from the multiplier estimate `(z − prox(z))/γ`, rescaled to
/// strict feasibility. Returns `(f, ⟨f, b⟩)` without the quadrature weight.
fn dual_from(
    problem: &ProblemSpec,
    set: &AffineSet,
    x: &[CMat],
    z: &[CMat],
    gamma: f64,
) -> Result<(Vec<f64>, f64)> {
    let layout = &problem.layout;
    let s: Vec<CMat> = z.iter().zip(x).map(|(a, b)| (a - b) / crate::matrix::C64::new(gamma, 0.0)).collect();
    let sc = layout.coords(&s);
    let m = set.rhs().len();
    let mut ks = vec![0.0; m];
    set.operator().apply(&sc, &mut ks);
    let mut f = vec![0.0; m];
    set.gram_solve(&ks, &mut f)?;
    let value = feasible_dual_value(problem, set, &mut f);
    Ok((f, value))
}

/// Rescales `f` so that `‖(Kᵀ f)_g‖ ≤ w_g` for every group and returns `⟨f, b⟩`.
fn feasible_dual_value(problem: &ProblemSpec, set: &AffineSet, f: &mut [f64]) -> f64 {
    let layout = &problem.layout;
    let mut kt = vec![0.0; layout.dim()];
    set.operator().apply_adjoint(f, &mut kt);
    let groups = layout.from_coords(&kt);
    let ratio = groups
        .iter()
        .zip(layout.groups())
        .map(|(g, spec)| operator_norm(g) / spec.weight)
        .fold(1.0_f64, f64::max);
    f.iter_mut().for_each(|v| *v /= ratio);
    dot(f, set.rhs())
}

fn zero_certificate(problem: &ProblemSpec) -> Certificate {
    Certificate {
        kind: problem.kind,
        params: problem.params,
        primal_value: 0.0,
        dual_value: 0.0,
        gap: 0.0,
        flux: problem.flux_from_groups(&problem.layout.zeros()),
        potential: problem.potential_from_coords(&vec![0.0; problem.rhs.len()]),
        residual: 0.0,
        fixed_point_residual: 0.0,
        iterations: 0,
        converged: true,
    }
}

/// Dual potential and dual value (including the quadrature weight) recovered
/// from a Douglas–Rachford state.
pub fn recover_dual(problem: &ProblemSpec, state: &DrState) -> Result<(Vec<HermitianMatrix>, f64)> {
    let Some(set) = &problem.set else {
        return Ok((problem.potential_from_coords(&vec![0.0; problem.rhs.len()]), 0.0));
    };
    if !same_shape(&state.z, &problem.layout) || !(state.gamma > 0.0) {
        return Err(Error::ShapeMismatch("solver state does not belong to this problem".into()));
    }
    let x: Vec<CMat> = state
        .z
        .iter()
        .zip(problem.layout.weights())
        .map(|(z, w)| svt(z, state.gamma * w))
        .collect();
    let (f, value) = dual_from(problem, set, &x, &state.z, state.gamma)?;
    Ok((problem.potential_from_coords(&f), problem.spacing() * value))
}

/// Dual value of an arbitrary potential after rescaling it to feasibility;
/// always a lower bound on the optimal value.
pub fn dual_bound(problem: &ProblemSpec, potential: &[HermitianMatrix]) -> Result<f64> {
    let Some(set) = &problem.set else {
        return Ok(0.0);
    };
    if potential.len() != problem.points() || potential.iter().any(|p| p.n() != problem.n) {
        return Err(Error::ShapeMismatch("potential does not match the problem".into()));
    }
    let d = problem.n * problem.n;
    let mut f = vec![0.0; set.rhs().len()];
    for (k, p) in potential.iter().enumerate() {
        block_coords(p.matrix(), 0, Structure::Hermitian, &mut f[k * d..(k + 1) * d]);
    }
    Ok(problem.spacing() * feasible_dual_value(problem, set, &mut f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{div_l, div_x, to_dense};

    fn pauli() -> (HermitianMatrix, HermitianMatrix, LFamily) {
        (
            HermitianMatrix::diag(&[1.0, 0.0]),
            HermitianMatrix::diag(&[0.0, 1.0]),
            LFamily::from_real(&[&[&[0.0, 1.0], &[1.0, 0.0]]]).unwrap(),
        )
    }

    fn matrix(rho0: &HermitianMatrix, rho1: &HermitianMatrix) -> Marginals {
        Marginals::Matrix { rho0: rho0.clone(), rho1: rho1.clone() }
    }

    #[test]
    fn pauli_instance_has_value_one() {
        let (a, b, l) = pauli();
        let cfg = SolverConfig::default();
        let p = assemble(ProblemKind::BalancedMatrix, &matrix(&a, &b), &l, Params::default(), &cfg).unwrap();
        assert_eq!(p.group_count(), 1);
        let cert = solve(&p, &cfg).unwrap();
        assert!(cert.converged, "{cert:?}");
        assert!((cert.value() - 1.0).abs() < 1e-6, "{}", cert.value());
        assert!(cert.dual_value <= cert.primal_value + 1e-12);
        assert!(cert.residual < 1e-12);
    }

    #[test]
    fn trace_mismatch_is_rejected() {
        let (a, _, l) = pauli();
        let b = HermitianMatrix::diag(&[0.0, 2.0]);
        let err = assemble(ProblemKind::BalancedMatrix, &matrix(&a, &b), &l, Params::default(), &SolverConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::TraceMismatch { .. }));
    }

    #[test]
    fn identical_marginals_give_zero_certificate() {
        let (a, _, l) = pauli();
        let cfg = SolverConfig::default();
        for kind in [ProblemKind::BalancedMatrix, ProblemKind::UnbalancedMatrix] {
            let p = assemble(kind, &matrix(&a, &a), &l, Params::default(), &cfg).unwrap();
            let cert = solve(&p, &cfg).unwrap();
            assert_eq!(cert.value(), 0.0);
            assert!(cert.converged && cert.iterations <= 2);
        }
    }

    #[test]
    fn kernel_violation_only_when_difference_meets_kernel() {
        // L = [diag(1, 0)] commutes with all diagonal matrices.
        let l = LFamily::new(vec![HermitianMatrix::diag(&[1.0, 0.0])]).unwrap();
        let (a, b, _) = pauli();
        let err = assemble(ProblemKind::BalancedMatrix, &matrix(&a, &b), &l, Params::default(), &SolverConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::KernelViolation { nullity: 2 }));
    }

    #[test]
    fn field_counts() {
        let grid = Grid1D::periodic(4, 1.0).unwrap();
        let (_, _, l) = pauli();
        let r0 = MatrixField::from_fn(grid, |k| HermitianMatrix::diag(&[1.0 + k as f64, 1.0])).unwrap();
        let r1 = MatrixField::from_fn(grid, |_| HermitianMatrix::diag(&[1.0, 2.0])).unwrap();
        let p = assemble(
            ProblemKind::UnbalancedField,
            &Marginals::Field { rho0: r0, rho1: r1 },
            &l,
            Params::field(1.0, 1.0, 1.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(p.group_count(), 8);
        assert_eq!(p.codomain_dim(), 16);
        assert_eq!(p.codomain_rank(), Some(16));
    }

    #[test]
    fn constraint_operator_matches_field_operators() {
        // K applied to a structured flux must equal −β₁ div_x u₁ + β₂ div_L u₂ + v.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let l = LFamily::from_real(&[&[&[1.0, 0.0], &[0.0, 0.0]], &[&[1.0, 1.0], &[1.0, 0.0]]]).unwrap();
        for grid in [Grid1D::periodic(5, 0.7).unwrap(), Grid1D::zero_flux(5, 0.7).unwrap()] {
            let r0 = MatrixField::from_fn(grid, |_| HermitianMatrix::diag(&[1.0, 2.0])).unwrap();
            let r1 = MatrixField::from_fn(grid, |k| HermitianMatrix::diag(&[2.0, k as f64])).unwrap();
            let (b1, b2) = (1.7, 0.4);
            let p = assemble(
                ProblemKind::UnbalancedField,
                &Marginals::Field { rho0: r0, rho1: r1 },
                &l,
                Params::field(2.0, b1, b2),
                &SolverConfig::default().with_projection(ProjectionMethod::Dense),
            )
            .unwrap();
            let x: Vec<f64> = (0..p.layout().dim()).map(|_| rng.random::<f64>() - 0.5).collect();
            let flux = p.flux_from_groups(&p.layout().from_coords(&x));
            let set = p.affine_set().unwrap();
            let mut y = vec![0.0; p.codomain_dim()];
            set.operator().apply(&x, &mut y);
            let got = p.potential_from_coords(&y);
            let u1: Vec<HermitianMatrix> =
                flux.iter().filter_map(|f| f.spatial.clone()).map(|m| HermitianMatrix::new(m).unwrap()).collect();
            let dx = div_x(&u1, &grid).unwrap();
            for (k, fp) in flux.iter().enumerate() {
                let dl = div_l(&l, fp.rotational.as_ref().unwrap()).unwrap();
                let want = dx.values()[k]
                    .scale(-b1)
                    .add(&dl.scale(b2))
                    .unwrap()
                    .add(fp.source.as_ref().unwrap())
                    .unwrap();
                assert!((want.matrix() - got[k].matrix()).norm() < 1e-12);
            }
            // Adjointness of the coordinate operator.
            let k = to_dense(set.operator());
            let mut kt = vec![0.0; p.layout().dim()];
            set.operator().apply_adjoint(&y, &mut kt);
            let dense_kt = k.transpose() * nalgebra::DVector::from_vec(y.clone());
            assert!(kt.iter().zip(dense_kt.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn spectral_and_dense_projections_agree() {
        let l = LFamily::from_real(&[&[&[1.0, 0.0], &[0.0, 0.0]], &[&[1.0, 1.0], &[1.0, 0.0]]]).unwrap();
        for grid in [Grid1D::periodic(6, 0.5).unwrap(), Grid1D::zero_flux(6, 0.5).unwrap()] {
            let r0 = MatrixField::from_fn(grid, |k| HermitianMatrix::diag(&[1.0 + k as f64, 1.0])).unwrap();
            let r1 = MatrixField::from_fn(grid, |k| HermitianMatrix::diag(&[1.0, 1.0 + k as f64])).unwrap();
            let m = Marginals::Field { rho0: r0, rho1: r1 };
            for kind in [ProblemKind::BalancedField, ProblemKind::UnbalancedField] {
                let build = |method| {
                    assemble(kind, &m, &l, Params::field(1.0, 2.0, 0.5), &SolverConfig::default().with_projection(method))
                        .unwrap()
                };
                let (pd, ps) = (build(ProjectionMethod::Dense), build(ProjectionMethod::Spectral));
                assert_eq!(pd.codomain_rank(), ps.codomain_rank());
                let z: Vec<f64> = (0..pd.layout().dim()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
                let (mut a, mut b) = (z.clone(), z);
                pd.affine_set().unwrap().project_coords(&mut a).unwrap();
                ps.affine_set().unwrap().project_coords(&mut b).unwrap();
                let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(err < 1e-10, "{err}");
            }
        }
    }
}
