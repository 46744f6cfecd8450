use mw1::distances::{random_balanced_pair, random_density, random_l_family};
use mw1::operators::div_l;
use mw1::oracle::{circular_emd, dual_grid_search, line_emd};
use mw1::{
    decompose_v1, field_w1, metric_audit, nuclear_norm, v1, w1, DensityLikeMatrix, Error, Grid1D, LFamily,
    MatrixField, SolverConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pauli() -> LFamily {
    LFamily::from_real(&[&[&[0.0, 1.0], &[1.0, 0.0]]]).unwrap()
}

fn scaled(rho: &DensityLikeMatrix, s: f64) -> DensityLikeMatrix {
    DensityLikeMatrix::new(rho.hermitian().scale(s)).unwrap()
}

fn profile(m: usize, h: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let s: f64 = p.iter().sum::<f64>() * h;
    p.iter_mut().for_each(|v| *v /= s);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unbalanced_is_below_balanced(seed in any::<u64>(), alpha in 0.05f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_l_family(3, 2, &mut rng);
        let (a, b) = random_balanced_pair(&l, &mut rng);
        let cfg = SolverConfig::default();
        let (bal, unb) = (w1(&a, &b, &l, &cfg).unwrap(), v1(&a, &b, &l, alpha, &cfg).unwrap());
        prop_assert!(unb.dual_value <= bal.primal_value + 1e-12);
        prop_assert!(unb.value() <= bal.value() + 2.0 * cfg.tol_gap * bal.value().max(1.0));
    }

    #[test]
    fn scalar_fields_match_closed_forms(seed in any::<u64>(), m in 3usize..24, periodic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = if periodic { Grid1D::periodic(m, 0.7).unwrap() } else { Grid1D::zero_flux(m, 0.7).unwrap() };
        let (p0, p1) = (profile(m, grid.spacing(), &mut rng), profile(m, grid.spacing(), &mut rng));
        let exact = if periodic { circular_emd(&p0, &p1, &grid) } else { line_emd(&p0, &p1, &grid) }.unwrap();
        let c = field_w1(
            &MatrixField::scalar(grid, &p0).unwrap(),
            &MatrixField::scalar(grid, &p1).unwrap(),
            &LFamily::scalar(),
            1.0,
            1.0,
            &SolverConfig::default(),
        )
        .unwrap();
        prop_assert!((c.value() - exact).abs() <= 1e-6 * exact.max(1.0), "{} vs {exact}", c.value());
    }

    #[test]
    fn decomposition_satisfies_the_split_constraints(seed in any::<u64>(), alpha in 0.2f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_l_family(2, 2, &mut rng);
        let a = scaled(&random_density(2, &mut rng), 0.5 + rng.random::<f64>());
        let b = scaled(&random_density(2, &mut rng), 0.5 + rng.random::<f64>());
        let cfg = SolverConfig::default();
        let c = v1(&a, &b, &l, alpha, &cfg).unwrap();
        let d = decompose_v1(&c, &a, &b).unwrap();
        prop_assert!((d.mu.trace() - d.nu.trace()).abs() <= 1e-8 * d.mu.trace().max(1.0));
        let div = div_l(&l, &d.u).unwrap();
        let gap = d.mu.hermitian().sub(d.nu.hermitian()).unwrap().sub(&div).unwrap();
        prop_assert!(nuclear_norm(gap.matrix()) <= 1e-8 * (a.trace() + b.trace()));
        prop_assert!((d.objective - c.value()).abs() <= 2.0 * cfg.tol_gap * c.value().max(1.0));
    }
}

#[test]
fn homogeneous_pauli_example() {
    let r0 = DensityLikeMatrix::diag(&[0.75, 0.25]).unwrap();
    let r1 = DensityLikeMatrix::diag(&[0.25, 0.75]).unwrap();
    let c = w1(&r0, &r1, &pauli(), &SolverConfig::default()).unwrap();
    assert!((c.value() - 0.5).abs() <= 1e-6);
    let bound = dual_grid_search(&r0, &r1, &pauli(), 2.0, 101, None).unwrap();
    assert!(bound >= 0.5 - 1e-3 && bound <= c.value() + 1e-9);
}

#[test]
fn zero_marginal_costs_alpha_times_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rho = scaled(&random_density(3, &mut rng), 2.0);
    let l = random_l_family(3, 2, &mut rng);
    let c = v1(&rho, &DensityLikeMatrix::zeros(3), &l, 0.4, &SolverConfig::default().with_tol_gap(1e-9)).unwrap();
    assert!((c.value() - 0.8).abs() <= 1e-7);
}

#[test]
fn unequal_traces_are_rejected_for_w1() {
    let r0 = DensityLikeMatrix::diag(&[1.0, 0.0]).unwrap();
    let r1 = DensityLikeMatrix::diag(&[0.0, 2.0]).unwrap();
    let err = w1(&r0, &r1, &pauli(), &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::TraceMismatch { .. }));
    assert!(err.to_string().contains("v1"));
}

#[test]
fn small_audits_pass() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = random_l_family(2, 2, &mut rng);
    let report = metric_audit(
        20,
        &cfg,
        |rng| [random_density(2, rng), random_density(2, rng), random_density(2, rng)],
        |a, b| w1(a, b, &l, &cfg),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.triples, 20);
    assert!(report.worst_identity <= cfg.tol_gap);
}
