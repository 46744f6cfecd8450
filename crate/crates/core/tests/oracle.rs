use mw1::distances::random_l_family;
use mw1::oracle::{circular_emd, dual_grid_search, line_emd};
use mw1::{v1, w1, DensityLikeMatrix, Error, Grid1D, HermitianMatrix, LFamily, SolverConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn profile(m: usize, h: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let s: f64 = p.iter().sum::<f64>() * h;
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Real symmetric density from a random real matrix.
fn real_density(rng: &mut ChaCha8Rng) -> DensityLikeMatrix {
    let (a, b, c) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>() - 0.5);
    let m = HermitianMatrix::from_real_rows(&[&[a * a + c * c, c * (a + b)], &[c * (a + b), b * b + c * c]]).unwrap();
    let t = m.trace();
    DensityLikeMatrix::new(m.scale(1.0 / t)).unwrap()
}

proptest! {
    #[test]
    fn circular_emd_is_a_metric(seed in any::<u64>(), m in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid1D::circle(m).unwrap();
        let h = grid.spacing();
        let (p, q, r) = (profile(m, h, &mut rng), profile(m, h, &mut rng), profile(m, h, &mut rng));
        let d = |a: &[f64], b: &[f64]| circular_emd(a, b, &grid).unwrap();
        prop_assert!(d(&p, &p).abs() <= 1e-12);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-12);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
    }

    #[test]
    fn circle_cut_away_from_the_support_is_a_line(seed in any::<u64>(), m in 4usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circle = Grid1D::periodic(m, 0.5).unwrap();
        let line = Grid1D::zero_flux(m, 0.5).unwrap();
        // Both densities vanish at the last point, so cutting there is free
        // only when the circular optimum does not route through the cut; a
        // single-sign cumulative difference guarantees that.
        let mut p = vec![0.0; m];
        let mut q = vec![0.0; m];
        let k = rng.random_range(0..m / 2);
        p[k] = 2.0;
        q[k + 1 + rng.random_range(0..m / 2 - 1).min(m - k - 3)] = 2.0;
        let (c, l) = (circular_emd(&p, &q, &circle).unwrap(), line_emd(&p, &q, &line).unwrap());
        prop_assert!(c <= l + 1e-12);
    }

    #[test]
    fn grid_search_is_nested_monotone_and_below_the_primal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = LFamily::from_real(&[&[&[0.0, 1.0], &[1.0, 0.0]], &[&[1.0, 0.0], &[0.0, -1.0]]]).unwrap();
        let (a, b) = (real_density(&mut rng), real_density(&mut rng));
        let coarse = dual_grid_search(&a, &b, &l, 1.0, 11, None).unwrap();
        let fine = dual_grid_search(&a, &b, &l, 1.0, 21, None).unwrap();
        prop_assert!(fine >= coarse - 1e-15);
        let c = w1(&a, &b, &l, &SolverConfig::default()).unwrap();
        prop_assert!(fine <= c.value() + 1e-9);
    }
}

#[test]
fn line_emd_rejects_unequal_mass() {
    let grid = Grid1D::zero_flux(4, 1.0).unwrap();
    let err = line_emd(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 2.0], &grid).unwrap_err();
    assert!(matches!(err, Error::TraceMismatch { .. }));
}

#[test]
fn unbalanced_grid_search_bounds_the_v1_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let l = random_l_family(2, 2, &mut rng);
    let l = LFamily::new(
        l.blocks()
            .iter()
            .map(|b| HermitianMatrix::new(b.matrix().map(|z| mw1::C64::from(z.re))).unwrap())
            .collect(),
    )
    .unwrap();
    let a = real_density(&mut rng);
    let b = DensityLikeMatrix::new(real_density(&mut rng).hermitian().scale(1.7)).unwrap();
    let bound = dual_grid_search(&a, &b, &l, 2.0, 201, Some(0.6)).unwrap();
    let c = v1(&a, &b, &l, 0.6, &SolverConfig::default()).unwrap();
    assert!(bound <= c.value() + 1e-9);
    assert!(bound >= 0.99 * c.value(), "bound {bound} vs {}", c.value());
}
