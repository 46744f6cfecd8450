use mw1::distances::{random_balanced_pair, random_density, random_gaussian, random_hermitian, random_l_family};
use mw1::solver::dual_bound;
use mw1::{
    assemble, field_v1, field_w1, solve, v1, w1, DensityLikeMatrix, Grid1D, HermitianMatrix, LFamily, Marginals,
    MatrixField, Params, ProblemKind, SolverConfig, CMat,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    random_gaussian(n, rng).qr().q()
}

fn scaled(rho: &DensityLikeMatrix, s: f64) -> DensityLikeMatrix {
    DensityLikeMatrix::new(rho.hermitian().scale(s)).unwrap()
}

fn random_field(grid: Grid1D, n: usize, mass: f64, rng: &mut ChaCha8Rng) -> MatrixField {
    let f = MatrixField::from_fn(grid, |_| random_density(n, rng).hermitian().clone()).unwrap();
    let m = f.mass();
    f.scale(mass / m)
}

fn tolerance(a: f64, b: f64, cfg: &SolverConfig) -> f64 {
    2.0 * cfg.tol_gap * a.max(b).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_iterate_is_weakly_dual(seed in any::<u64>(), iters in 1usize..200, unbalanced in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_l_family(3, 2, &mut rng);
        let (a, b) = random_balanced_pair(&l, &mut rng);
        let cfg = SolverConfig { check_every: 1, ..SolverConfig::default().with_max_iter(iters) };
        let c = if unbalanced { v1(&a, &scaled(&b, 1.3), &l, 0.7, &cfg) } else { w1(&a, &b, &l, &cfg) }.unwrap();
        prop_assert!(c.dual_value <= c.primal_value + 1e-12);
        prop_assert!(c.residual <= 1e-10);
    }

    #[test]
    fn random_potentials_give_lower_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_l_family(2, 2, &mut rng);
        let (a, b) = random_balanced_pair(&l, &mut rng);
        let cfg = SolverConfig::default();
        let marginals = Marginals::Matrix { rho0: a.hermitian().clone(), rho1: b.hermitian().clone() };
        let problem = assemble(ProblemKind::BalancedMatrix, &marginals, &l, Params::default(), &cfg).unwrap();
        let c = solve(&problem, &cfg).unwrap();
        for _ in 0..20 {
            let f = random_hermitian(2, &mut rng);
            prop_assert!(dual_bound(&problem, &[f]).unwrap() <= c.primal_value + 1e-12);
        }
        prop_assert!((problem.objective(&c.flux).unwrap() - c.primal_value).abs() <= 1e-12 * c.primal_value.max(1.0));
        prop_assert!(problem.residual(&c.flux).unwrap() <= 1e-10);
    }

    #[test]
    fn value_is_unitarily_invariant(seed in any::<u64>(), n in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_l_family(n, 2, &mut rng);
        let (a, b) = random_balanced_pair(&l, &mut rng);
        let u = random_unitary(n, &mut rng);
        let conj = |r: &DensityLikeMatrix| DensityLikeMatrix::new(r.hermitian().conjugate_by(&u)).unwrap();
        let cfg = SolverConfig::default();
        let base = w1(&a, &b, &l, &cfg).unwrap();
        let rotated = w1(&conj(&a), &conj(&b), &l.conjugate_by(&u).unwrap(), &cfg).unwrap();
        prop_assert!((base.value() - rotated.value()).abs() <= tolerance(base.value(), rotated.value(), &cfg));
        let base = v1(&a, &scaled(&b, 0.6), &l, 0.8, &cfg).unwrap();
        let rotated = v1(&conj(&a), &conj(&scaled(&b, 0.6)), &l.conjugate_by(&u).unwrap(), 0.8, &cfg).unwrap();
        prop_assert!((base.value() - rotated.value()).abs() <= tolerance(base.value(), rotated.value(), &cfg));
    }

    #[test]
    fn matrix_values_are_positively_homogeneous(seed in any::<u64>(), lambda in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_l_family(3, 2, &mut rng);
        let (a, b) = random_balanced_pair(&l, &mut rng);
        let cfg = SolverConfig::default();
        let base = w1(&a, &b, &l, &cfg).unwrap().value();
        let up = w1(&scaled(&a, lambda), &scaled(&b, lambda), &l, &cfg).unwrap().value();
        prop_assert!((up - lambda * base).abs() <= tolerance(up, lambda * base, &cfg));
        let b = scaled(&b, 1.5);
        let base = v1(&a, &b, &l, 1.0, &cfg).unwrap().value();
        let up = v1(&scaled(&a, lambda), &scaled(&b, lambda), &l, 1.0, &cfg).unwrap().value();
        prop_assert!((up - lambda * base).abs() <= tolerance(up, lambda * base, &cfg));
    }
}

#[test]
fn field_values_are_positively_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = Grid1D::circle(16).unwrap();
    let l = random_l_family(2, 2, &mut rng);
    let (a, b) = (random_field(grid, 2, 1.0, &mut rng), random_field(grid, 2, 1.0, &mut rng));
    let cfg = SolverConfig::default();
    for lambda in [0.3, 2.5] {
        let base = field_w1(&a, &b, &l, 1.0, 0.5, &cfg).unwrap().value();
        let up = field_w1(&a.scale(lambda), &b.scale(lambda), &l, 1.0, 0.5, &cfg).unwrap().value();
        assert!((up - lambda * base).abs() <= tolerance(up, lambda * base, &cfg), "{up} vs {}", lambda * base);
        let c = b.scale(1.4);
        let base = field_v1(&a, &c, &l, 1.0, 1.0, 0.5, &cfg).unwrap().value();
        let up = field_v1(&a.scale(lambda), &c.scale(lambda), &l, 1.0, 1.0, 0.5, &cfg).unwrap().value();
        assert!((up - lambda * base).abs() <= tolerance(up, lambda * base, &cfg), "{up} vs {}", lambda * base);
    }
}

#[test]
fn pauli_saturates_at_large_alpha() {
    let l = LFamily::from_real(&[&[&[0.0, 1.0], &[1.0, 0.0]]]).unwrap();
    let r0 = DensityLikeMatrix::diag(&[1.0, 0.0]).unwrap();
    let r1 = DensityLikeMatrix::diag(&[0.0, 1.0]).unwrap();
    let cfg = SolverConfig::default();
    let mut previous = 0.0;
    for alpha in [0.1, 0.3, 0.5, 1.0, 3.0, 10.0, 30.0, 100.0] {
        let c = v1(&r0, &r1, &l, alpha, &cfg).unwrap();
        assert!(c.value() >= previous - tolerance(c.value(), previous, &cfg));
        if alpha >= 10.0 {
            assert!((c.value() - 1.0).abs() <= 1e-5, "alpha {alpha}: {}", c.value());
        }
        previous = c.value();
    }
    // Below saturation the pure source is cheaper: 2α for α < 1/2.
    let c = v1(&r0, &r1, &l, 0.25, &cfg).unwrap();
    assert!((c.value() - 0.5).abs() <= 1e-6);
}

#[test]
fn potential_shifts_do_not_change_balanced_dual_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let l = random_l_family(3, 2, &mut rng);
    let (a, b) = random_balanced_pair(&l, &mut rng);
    let cfg = SolverConfig::default();
    let marginals = Marginals::Matrix { rho0: a.hermitian().clone(), rho1: b.hermitian().clone() };
    let problem = assemble(ProblemKind::BalancedMatrix, &marginals, &l, Params::default(), &cfg).unwrap();
    let c = solve(&problem, &cfg).unwrap();
    let f = &c.potential[0];
    let shifted = f.add(&HermitianMatrix::identity(3).scale(rng.random::<f64>() * 4.0 - 2.0)).unwrap();
    let (d0, d1) = (dual_bound(&problem, &[f.clone()]).unwrap(), dual_bound(&problem, &[shifted]).unwrap());
    assert!((d0 - d1).abs() <= tolerance(d0, d1, &cfg));
    assert!((d0 - c.dual_value).abs() <= 1e-10 * d0.max(1.0));
}
