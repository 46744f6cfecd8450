//! Self-check suites: metric axioms, duality gaps, adjointness and oracle
//! agreement on seeded random instances.

use mw1::distances::{random_balanced_pair, random_density, random_hermitian, random_l_family};
use mw1::operators::{div_l, div_x, grad_l, grad_x};
use mw1::oracle::{circular_emd, dual_grid_search};
use mw1::{
    field_w1, metric_audit, trace_inner, v1, w1, BlockVector, DensityLikeMatrix, Grid1D, HermitianMatrix, LFamily,
    MatrixField, SolverConfig, Structure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Outcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub struct CheckOptions {
    pub count: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
}

pub fn run(opts: &CheckOptions) -> Vec<Outcome> {
    let mut out = Vec::new();
    for &n in &opts.dims {
        out.push(duality_gaps(n, opts));
        out.push(audit_w1(n, opts));
        out.push(audit_v1(n, opts));
        out.push(adjoint_l(n, opts));
    }
    out.push(adjoint_x(opts));
    out.push(pauli_oracle());
    out.push(scalar_oracle(opts));
    out
}

fn outcome(name: impl Into<String>, result: mw1::Result<(bool, String)>) -> Outcome {
    let name = name.into();
    match result {
        Ok((passed, detail)) => Outcome { name, passed, detail },
        Err(e) => Outcome { name, passed: false, detail: format!("error: {e}") },
    }
}

fn duality_gaps(n: usize, opts: &CheckOptions) -> Outcome {
    let cfg = SolverConfig::default().with_tol_gap(1e-5);
    let run = || -> mw1::Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst = 0.0_f64;
        let mut failed = 0;
        for i in 0..opts.count {
            let l = random_l_family(n, 1 + i % 2, &mut rng);
            let (a, b) = random_balanced_pair(&l, &mut rng);
            let c = w1(&a, &b, &l, &cfg)?;
            worst = worst.max(c.relative_gap());
            failed += usize::from(!c.converged);
        }
        Ok((failed == 0, format!("{} instances, worst relative gap {worst:.2e}, {failed} unconverged", opts.count)))
    };
    outcome(format!("duality gap n={n}"), run())
}

fn audit_w1(n: usize, opts: &CheckOptions) -> Outcome {
    let cfg = SolverConfig { seed: opts.seed, ..SolverConfig::default() };
    let mut lrng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let l = random_l_family(n, 2, &mut lrng);
    let report = metric_audit(
        opts.count,
        &cfg,
        |rng| [random_density(n, rng), random_density(n, rng), random_density(n, rng)],
        |a, b| w1(a, b, &l, &cfg),
    );
    outcome(format!("metric axioms w1 n={n}"), report.map(|r| (r.passed(), summary(&r))))
}

fn audit_v1(n: usize, opts: &CheckOptions) -> Outcome {
    let cfg = SolverConfig { seed: opts.seed, ..SolverConfig::default() };
    let mut lrng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let l = random_l_family(n, 2, &mut lrng);
    let scaled = |rng: &mut ChaCha8Rng| {
        let s = 0.5 + rng.random::<f64>();
        DensityLikeMatrix::new(random_density(n, rng).hermitian().scale(s)).expect("scaled density")
    };
    let report = metric_audit(
        opts.count,
        &cfg,
        |rng| [scaled(rng), scaled(rng), scaled(rng)],
        |a, b| v1(a, b, &l, 1.0, &cfg),
    );
    outcome(format!("metric axioms v1 n={n}"), report.map(|r| (r.passed(), summary(&r))))
}

fn summary(r: &mw1::distances::AuditReport) -> String {
    format!(
        "{} triples, {} violations, {} unconverged, worst triangle excess {:.2e}",
        r.triples,
        r.violations.len(),
        r.unconverged,
        r.worst_triangle
    )
}

fn adjoint_l(n: usize, opts: &CheckOptions) -> Outcome {
    let run = || -> mw1::Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let (mut worst, mut worst_trace) = (0.0_f64, 0.0_f64);
        for i in 0..opts.count {
            let l = random_l_family(n, 1 + i % 3, &mut rng);
            let f = random_hermitian(n, &mut rng);
            let blocks = (0..l.len())
                .map(|_| {
                    let h = random_hermitian(n, &mut rng);
                    h.matrix() * mw1::C64::new(0.0, 1.0)
                })
                .collect();
            let u = BlockVector::new(blocks, vec![Structure::Skew; l.len()])?;
            let lhs = trace_inner(&grad_l(&l, &f)?, &u)?.re;
            let div = div_l(&l, &u)?;
            let rhs = trace_inner(&f, &div)?.re;
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
            worst_trace = worst_trace.max(div.trace().abs());
        }
        Ok((worst <= 1e-10 && worst_trace <= 1e-12, format!("adjoint defect {worst:.2e}, trace {worst_trace:.2e}")))
    };
    outcome(format!("grad_L/div_L n={n}"), run())
}

fn adjoint_x(opts: &CheckOptions) -> Outcome {
    let run = || -> mw1::Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst = 0.0_f64;
        for i in 0..opts.count {
            let m = 3 + i % 7;
            let grid = if i % 2 == 0 { Grid1D::periodic(m, 0.3)? } else { Grid1D::zero_flux(m, 0.3)? };
            let f = MatrixField::from_fn(grid, |_| random_hermitian(2, &mut rng))?;
            let u: Vec<HermitianMatrix> = (0..grid.flux_len()).map(|_| random_hermitian(2, &mut rng)).collect();
            let h = grid.spacing();
            let g = grad_x(&f);
            let lhs: f64 = h * g.iter().zip(&u).map(|(a, b)| trace_inner(a, b).map(|z| z.re)).sum::<mw1::Result<f64>>()?;
            let rhs = -f.inner(&div_x(&u, &grid)?)?;
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
        Ok((worst <= 1e-10, format!("adjoint defect {worst:.2e}")))
    };
    outcome("grad_x/div_x", run())
}

fn pauli_oracle() -> Outcome {
    let run = || -> mw1::Result<(bool, String)> {
        let l = LFamily::from_real(&[&[&[0.0, 1.0], &[1.0, 0.0]]])?;
        let r0 = DensityLikeMatrix::diag(&[1.0, 0.0])?;
        let r1 = DensityLikeMatrix::diag(&[0.0, 1.0])?;
        let c = w1(&r0, &r1, &l, &SolverConfig::default())?;
        let bound = dual_grid_search(&r0, &r1, &l, 2.0, 201, None)?;
        let ok = (c.value() - 1.0).abs() <= 1e-6 && bound >= 0.99 && bound <= c.value() + 1e-9;
        Ok((ok, format!("W1 = {:.9}, grid bound {bound:.6}", c.value())))
    };
    outcome("Pauli instance", run())
}

fn scalar_oracle(opts: &CheckOptions) -> Outcome {
    let run = || -> mw1::Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let grid = Grid1D::circle(64)?;
        let mut worst = 0.0_f64;
        for _ in 0..opts.count {
            let mut p0: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
            let mut p1: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
            let (s0, s1) = (p0.iter().sum::<f64>(), p1.iter().sum::<f64>());
            p0.iter_mut().for_each(|v| *v /= s0 * grid.spacing());
            p1.iter_mut().for_each(|v| *v /= s1 * grid.spacing());
            let exact = circular_emd(&p0, &p1, &grid)?;
            let c = field_w1(
                &MatrixField::scalar(grid, &p0)?,
                &MatrixField::scalar(grid, &p1)?,
                &LFamily::scalar(),
                1.0,
                1.0,
                &SolverConfig::default(),
            )?;
            worst = worst.max((c.value() - exact).abs());
        }
        Ok((worst <= 1e-6, format!("worst deviation from circular EMD {worst:.2e}")))
    };
    outcome("scalar reduction", run())
}
