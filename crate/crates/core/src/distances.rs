//! The user-facing distances and a numerical audit of their metric axioms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::matrix::{nuclear_norm, BlockVector, CMat, DensityLikeMatrix, HermitianMatrix, Structure, C64};
use crate::operators::{LFamily, MatrixField};
use crate::solver::{assemble, solve, Certificate, Marginals, Params, ProblemKind};

fn matrix_marginals(rho0: &DensityLikeMatrix, rho1: &DensityLikeMatrix) -> Marginals {
    Marginals::Matrix {
        rho0: rho0.hermitian().clone(),
        rho1: rho1.hermitian().clone(),
    }
}

/// Balanced distance `W₁(ρ₀, ρ₁)`. Unequal traces yield
/// [`Error::TraceMismatch`]; use [`v1`] for those.
pub fn w1(rho0: &DensityLikeMatrix, rho1: &DensityLikeMatrix, l: &LFamily, config: &SolverConfig) -> Result<Certificate> {
    let p = assemble(ProblemKind::BalancedMatrix, &matrix_marginals(rho0, rho1), l, Params::default(), config)?;
    solve(&p, config)
}

/// Unbalanced distance with source weight `alpha`.
pub fn v1(
    rho0: &DensityLikeMatrix,
    rho1: &DensityLikeMatrix,
    l: &LFamily,
    alpha: f64,
    config: &SolverConfig,
) -> Result<Certificate> {
    let p = assemble(ProblemKind::UnbalancedMatrix, &matrix_marginals(rho0, rho1), l, Params::alpha(alpha), config)?;
    solve(&p, config)
}

/// Balanced distance between matrix-valued densities on a grid.
pub fn field_w1(
    rho0: &MatrixField,
    rho1: &MatrixField,
    l: &LFamily,
    beta1: f64,
    beta2: f64,
    config: &SolverConfig,
) -> Result<Certificate> {
    rho0.validate_density()?;
    rho1.validate_density()?;
    let m = Marginals::Field { rho0: rho0.clone(), rho1: rho1.clone() };
    let p = assemble(ProblemKind::BalancedField, &m, l, Params::field(1.0, beta1, beta2), config)?;
    solve(&p, config)
}

/// Unbalanced distance between matrix-valued densities on a grid.
pub fn field_v1(
    rho0: &MatrixField,
    rho1: &MatrixField,
    l: &LFamily,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    config: &SolverConfig,
) -> Result<Certificate> {
    rho0.validate_density()?;
    rho1.validate_density()?;
    let m = Marginals::Field { rho0: rho0.clone(), rho1: rho1.clone() };
    let p = assemble(ProblemKind::UnbalancedField, &m, l, Params::field(alpha, beta1, beta2), config)?;
    solve(&p, config)
}

/// Balanced reformulation of an unbalanced optimum: inflated marginals of
/// equal trace and the flux transporting one into the other.
#[derive(Clone, Debug, PartialEq)]
pub struct V1Decomposition {
    /// `ρ₀ + v₀`.
    pub mu: DensityLikeMatrix,
    /// `ρ₁ + v₁`.
    pub nu: DensityLikeMatrix,
    /// Flux with `∇_L* u = μ − ν` (up to the certificate residual).
    pub u: BlockVector,
    /// `‖u‖_* + α‖ρ₀ − μ‖_* + α‖ρ₁ − ν‖_*`.
    pub objective: f64,
}

/// Splits the source of a converged unbalanced certificate as `v = v₁ − v₀`
/// into positive and negative parts and returns `μ = ρ₀ + v₀`, `ν = ρ₁ + v₁`.
pub fn decompose_v1(cert: &Certificate, rho0: &DensityLikeMatrix, rho1: &DensityLikeMatrix) -> Result<V1Decomposition> {
    if cert.kind != ProblemKind::UnbalancedMatrix {
        return Err(Error::InvalidParameter("decomposition needs an unbalanced matrix certificate".into()));
    }
    if !cert.converged {
        return Err(Error::NotConverged { gap: cert.gap, iterations: cert.iterations });
    }
    let point = cert
        .flux
        .first()
        .ok_or_else(|| Error::ShapeMismatch("certificate has no flux".into()))?;
    let n = rho0.n();
    if rho1.n() != n || cert.potential.first().map(HermitianMatrix::n) != Some(n) {
        return Err(Error::ShapeMismatch("marginals do not match the certificate".into()));
    }
    let v = point.source.clone().unwrap_or_else(|| HermitianMatrix::zeros(n));
    let (v1, v0) = v.positive_negative_parts();
    let mu = DensityLikeMatrix::new(rho0.hermitian().add(&v0)?)?;
    let nu = DensityLikeMatrix::new(rho1.hermitian().add(&v1)?)?;
    let u = point
        .rotational
        .clone()
        .unwrap_or_else(|| BlockVector::zeros(n, vec![Structure::Skew]));
    let alpha = cert.params.alpha;
    let objective = nuclear_norm(&u)
        + alpha * nuclear_norm(rho0.hermitian().sub(mu.hermitian())?.matrix())
        + alpha * nuclear_norm(rho1.hermitian().sub(nu.hermitian())?.matrix());
    Ok(V1Decomposition { mu, nu, u, objective })
}

/// Seeded complex Gaussian `n×n` matrix.
pub fn random_gaussian(n: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// `GGᴴ / tr(GGᴴ)` for a complex Gaussian `G`: a full-rank unit-trace density.
pub fn random_density(n: usize, rng: &mut impl Rng) -> DensityLikeMatrix {
    let g = random_gaussian(n, rng);
    let p = &g * g.adjoint();
    let t = p.trace().re;
    let h = HermitianMatrix::from_hermitian_part(&(p / C64::new(t, 0.0)));
    DensityLikeMatrix::new(h).expect("Gram matrices are positive semidefinite")
}

/// Random Hermitian matrix `(G + Gᴴ)/2`.
pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> HermitianMatrix {
    HermitianMatrix::from_hermitian_part(&random_gaussian(n, rng))
}

/// Random family of `count` Hermitian matrices.
///
/// Two or more generic matrices satisfy the kernel condition and the family
/// is redrawn until it does. A single matrix never does for `n ≥ 2` (it
/// commutes with its own polynomials); see [`random_balanced_pair`].
pub fn random_l_family(n: usize, count: usize, rng: &mut impl Rng) -> LFamily {
    loop {
        let l = LFamily::new((0..count).map(|_| random_hermitian(n, rng)).collect()).expect("same size blocks");
        if l.kernel().pass || n == 1 || count == 1 {
            return l;
        }
    }
}

/// Random equal-trace densities whose difference is admissible for `l`.
///
/// When the kernel condition holds these are two independent draws of
/// [`random_density`]. For a single generic `L₁` the difference must avoid
/// the commutant of `L₁`, i.e. have zero diagonal in its eigenbasis: `ρ₀` is
/// random and `ρ₁ = D^{1/2} C D^{1/2}` there, with `D` the diagonal of `ρ₀` and
/// `C` a random correlation matrix.
pub fn random_balanced_pair(l: &LFamily, rng: &mut impl Rng) -> (DensityLikeMatrix, DensityLikeMatrix) {
    let n = l.n();
    let rho0 = random_density(n, rng);
    if l.kernel().pass || n == 1 || l.len() > 1 {
        return (rho0, random_density(n, rng));
    }
    let q = nalgebra::SymmetricEigen::new(l.blocks()[0].matrix().clone()).eigenvectors;
    let r0 = q.adjoint() * rho0.matrix() * &q;
    let g = random_gaussian(n, rng);
    let gram = &g * g.adjoint();
    let corr = CMat::from_fn(n, n, |i, j| {
        gram[(i, j)] / (gram[(i, i)].re * gram[(j, j)].re).sqrt()
    });
    let sd: Vec<f64> = (0..n).map(|i| r0[(i, i)].re.max(0.0).sqrt()).collect();
    let r1 = CMat::from_fn(n, n, |i, j| corr[(i, j)] * sd[i] * sd[j]);
    let rho1 = HermitianMatrix::from_hermitian_part(&(&q * r1 * q.adjoint()));
    (rho0, DensityLikeMatrix::new(rho1).expect("congruence of a correlation matrix"))
}

/// Worst observed metric-axiom defects over an audit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub triples: usize,
    /// Largest `|d(a,b) − d(b,a)| / scale`.
    pub worst_symmetry: f64,
    /// Largest `d(a,a) / scale`.
    pub worst_identity: f64,
    /// Largest `(d(a,c) − d(a,b) − d(b,c)) / scale` (negative when slack).
    pub worst_triangle: f64,
    pub violations: Vec<AuditViolation>,
    /// Solves that stopped before certifying their tolerance.
    pub unconverged: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.unconverged == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axiom {
    Symmetry,
    Identity,
    Triangle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditViolation {
    pub triple: usize,
    pub axiom: Axiom,
    /// Defect divided by `tol_gap · scale`.
    pub excess: f64,
}

/// Checks symmetry, identity and the triangle inequality of `distance` on
/// `count` triples drawn by `sample` from an RNG seeded with `config.seed`.
///
/// With `scale = max(1, values involved)`, the tolerances are
/// `2·tol_gap·scale`, `tol_gap·scale` and `3·tol_gap·scale` respectively.
pub fn metric_audit<T>(
    count: usize,
    config: &SolverConfig,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> [T; 3],
    mut distance: impl FnMut(&T, &T) -> Result<Certificate>,
) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = AuditReport {
        worst_triangle: f64::NEG_INFINITY,
        ..AuditReport::default()
    };
    let tol = config.tol_gap;
    for t in 0..count {
        let [a, b, c] = sample(&mut rng);
        let mut d = |x: &T, y: &T| -> Result<f64> {
            let cert = distance(x, y)?;
            if !cert.converged {
                report.unconverged += 1;
            }
            Ok(cert.value())
        };
        let (ab, ba, bc, ac, aa) = (d(&a, &b)?, d(&b, &a)?, d(&b, &c)?, d(&a, &c)?, d(&a, &a)?);
        let mut check = |axiom, defect: f64, scale: f64, factor: f64, worst: &mut f64| {
            let rel = defect / scale;
            *worst = worst.max(rel);
            if defect > factor * tol * scale {
                report.violations.push(AuditViolation { triple: t, axiom, excess: defect / (tol * scale) });
            }
        };
        let mut ws = report.worst_symmetry;
        let mut wi = report.worst_identity;
        let mut wt = report.worst_triangle;
        check(Axiom::Symmetry, (ab - ba).abs(), ab.max(ba).max(1.0), 2.0, &mut ws);
        check(Axiom::Identity, aa.abs(), aa.abs().max(1.0), 1.0, &mut wi);
        check(Axiom::Triangle, ac - ab - bc, ac.max(ab).max(bc).max(1.0), 3.0, &mut wt);
        report.worst_symmetry = ws;
        report.worst_identity = wi;
        report.worst_triangle = wt;
        report.triples += 1;
    }
    if count == 0 {
        report.worst_triangle = 0.0;
    }
    Ok(report)
}
