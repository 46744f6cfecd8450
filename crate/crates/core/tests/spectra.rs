use mw1::spectra::{eval_ar, eval_spectrum, example_family, sample_spectrum, ArId, SpectrumId, Variant};
use mw1::{field_v1, Grid1D, SolverConfig, Structure};
use proptest::prelude::*;
use std::f64::consts::PI;

proptest! {
    #[test]
    fn spectra_are_hermitian_psd(theta in 0.0f64..(2.0 * PI), canonical in any::<bool>()) {
        let variant = if canonical { Variant::Canonical } else { Variant::AsPrinted };
        for id in SpectrumId::ALL {
            let s = eval_spectrum(id, theta, variant).unwrap();
            let scale = s.matrix().norm().max(1e-300);
            prop_assert!(Structure::Hermitian.defect(s.matrix()) <= 1e-10 * scale);
            prop_assert!(s.eigenvalues().iter().all(|&l| l >= -1e-10 * scale));
        }
    }
}

#[test]
fn canonical_a1_is_resonant_near_two_pi_over_three() {
    let at = |t: f64| eval_ar(ArId::A1, t, Variant::Canonical).norm();
    let centre = at(2.0 * PI / 3.0);
    assert!(centre < at(2.0 * PI / 3.0 - 0.05) && centre < at(2.0 * PI / 3.0 + 0.05));
}

#[test]
fn variants_differ() {
    let worst = (0..64)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 64.0;
            (eval_ar(ArId::A0, t, Variant::AsPrinted) - eval_ar(ArId::A0, t, Variant::Canonical)).norm()
        })
        .fold(0.0, f64::max);
    assert!(worst > 0.1);
}

#[test]
fn two_point_grid_samples_two_points() {
    let grid = Grid1D::circle(2).unwrap();
    let f = sample_spectrum(SpectrumId::Rho1, &grid, Variant::AsPrinted).unwrap();
    assert_eq!(f.values().len(), 2);
    let direct = eval_spectrum(SpectrumId::Rho1, PI, Variant::AsPrinted).unwrap();
    assert!((f.values()[1].matrix() - direct.matrix()).norm() < 1e-12);
}

#[test]
fn small_table_is_symmetric_and_homogeneous() {
    let grid = Grid1D::circle(24).unwrap();
    let cfg = SolverConfig::default();
    let l = example_family();
    let field = |id| sample_spectrum(id, &grid, Variant::AsPrinted).unwrap();
    let (r0, r2) = (field(SpectrumId::Rho0), field(SpectrumId::Rho2));
    let ab = field_v1(&r0, &r2, &l, 1.0, 1.0, 1.0, &cfg).unwrap();
    let ba = field_v1(&r2, &r0, &l, 1.0, 1.0, 1.0, &cfg).unwrap();
    let tol = 2.0 * cfg.tol_gap * ab.value().max(ba.value()).max(1.0);
    assert!((ab.value() - ba.value()).abs() <= tol, "{} vs {}", ab.value(), ba.value());
    let up = field_v1(&r0.scale(3.0), &r2.scale(3.0), &l, 1.0, 1.0, 1.0, &cfg).unwrap();
    assert!((up.value() - 3.0 * ab.value()).abs() <= 2.0 * cfg.tol_gap * up.value().max(1.0));
}
