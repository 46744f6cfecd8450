//! Solver-free reference values: closed-form scalar transport on a circle
//! and an interval, and brute-force dual search for tiny 2×2 instances.

use crate::error::{Error, Result};
use crate::matrix::DensityLikeMatrix;
use crate::operators::{Boundary, Grid1D, LFamily};

/// Relative mass tolerance of the scalar oracles.
const MASS_TOLERANCE: f64 = 1e-9;

/// Cumulative mass difference `F_k = h·Σ_{j≤k} (p0_j − p1_j)`.
fn cumulative(p0: &[f64], p1: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    if p0.len() != grid.len() || p1.len() != grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} and {} samples on a grid of {} points",
            p0.len(),
            p1.len(),
            grid.len()
        )));
    }
    if p0.iter().chain(p1).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("scalar densities must be nonnegative".into()));
    }
    let h = grid.spacing();
    let (mass0, mass1) = (h * p0.iter().sum::<f64>(), h * p1.iter().sum::<f64>());
    if (mass0 - mass1).abs() > MASS_TOLERANCE * mass0.max(mass1).max(1.0) {
        return Err(Error::TraceMismatch { mass0, mass1 });
    }
    let mut acc = 0.0;
    Ok(p0
        .iter()
        .zip(p1)
        .map(|(a, b)| {
            acc += h * (a - b);
            acc
        })
        .collect())
}

/// Earth mover's distance on a periodic grid with arc-length cost:
/// `min_c Σ_k h·|F_k − c|`, attained at a median of `F`.
pub fn circular_emd(p0: &[f64], p1: &[f64], grid: &Grid1D) -> Result<f64> {
    if grid.boundary() != Boundary::Periodic {
        return Err(Error::InvalidParameter("circular_emd needs a periodic grid".into()));
    }
    let f = cumulative(p0, p1, grid)?;
    let mut sorted = f.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    Ok(grid.spacing() * f.iter().map(|v| (v - median).abs()).sum::<f64>())
}

/// Earth mover's distance on an interval, `Σ_k h·|F_k|`.
pub fn line_emd(p0: &[f64], p1: &[f64], grid: &Grid1D) -> Result<f64> {
    if grid.boundary() != Boundary::ZeroFlux {
        return Err(Error::InvalidParameter("line_emd needs a zero-flux grid".into()));
    }
    let f = cumulative(p0, p1, grid)?;
    Ok(grid.spacing() * f.iter().map(|v| v.abs()).sum::<f64>())
}

fn real_symmetric_2x2(m: &nalgebra::DMatrix<crate::matrix::C64>, what: &str) -> Result<[f64; 3]> {
    if m.nrows() != 2 {
        return Err(Error::InvalidParameter(format!("{what} must be 2×2")));
    }
    let scale = m.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(1.0);
    if m.iter().any(|z| z.im.abs() > 1e-12 * scale) || (m[(0, 1)].re - m[(1, 0)].re).abs() > 1e-12 * scale {
        return Err(Error::InvalidParameter(format!("{what} must be real symmetric")));
    }
    Ok([m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)].re])
}

/// Best objective `tr(f(ρ₀ − ρ₁))` over real symmetric
/// `f = [[a, c], [c, b]]` on a uniform grid of `[−box, box]³`, subject to
/// `‖∇_L f‖ ≤ 1` and, when `alpha` is given, `‖f‖ ≤ α`. Every grid point
/// kept is dual feasible, so the result is a lower bound on the distance.
///
/// For real symmetric `L = [[p, q], [q, r]]` the commutator `[L, f]` is
/// antisymmetric with off-diagonal entry `c(p − r) + q(b − a)`, which makes
/// the operator norm of the stacked gradient the Euclidean norm of these
/// entries.
pub fn dual_grid_search(
    rho0: &DensityLikeMatrix,
    rho1: &DensityLikeMatrix,
    l: &LFamily,
    half_width: f64,
    steps: usize,
    alpha: Option<f64>,
) -> Result<f64> {
    if rho0.n() != 2 || rho1.n() != 2 || l.n() != 2 {
        return Err(Error::InvalidParameter("dual_grid_search handles 2×2 instances only".into()));
    }
    if steps < 2 || !(half_width > 0.0) {
        return Err(Error::InvalidParameter("need steps ≥ 2 and a positive box".into()));
    }
    let diff = rho0.matrix() - rho1.matrix();
    let [d00, d11, d01] = real_symmetric_2x2(&diff, "ρ₀ − ρ₁")?;
    let ls: Vec<[f64; 3]> = l
        .blocks()
        .iter()
        .map(|b| real_symmetric_2x2(b.matrix(), "L"))
        .collect::<Result<_>>()?;
    let axis: Vec<f64> = (0..steps)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (steps - 1) as f64)
        .collect();
    let mut best = f64::NEG_INFINITY;
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                let grad: f64 = ls
                    .iter()
                    .map(|[p, r, q]| (c * (p - r) + q * (b - a)).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if grad > 1.0 {
                    continue;
                }
                if let Some(alpha) = alpha {
                    let norm = (0.5 * (a + b)).abs() + (0.25 * (a - b) * (a - b) + c * c).sqrt();
                    if norm > alpha {
                        continue;
                    }
                }
                best = best.max(a * d00 + b * d11 + 2.0 * c * d01);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_masses_move_along_the_shorter_arc() {
        let m = 12;
        let grid = Grid1D::circle(m).unwrap();
        let h = grid.spacing();
        for k in 1..m {
            let mut p0 = vec![0.0; m];
            let mut p1 = vec![0.0; m];
            p0[0] = 1.0 / h;
            p1[k] = 1.0 / h;
            let d = circular_emd(&p0, &p1, &grid).unwrap();
            assert!((d - h * k.min(m - k) as f64).abs() < 1e-12, "k = {k}: {d}");
        }
    }

    #[test]
    fn two_point_circle() {
        let grid = Grid1D::periodic(2, 1.0).unwrap();
        assert!((circular_emd(&[1.0, 0.0], &[0.0, 1.0], &grid).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adjacent_deltas_on_a_line() {
        let grid = Grid1D::zero_flux(5, 0.5).unwrap();
        let d = line_emd(&[0.0, 2.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 2.0, 0.0, 0.0], &grid).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mass_mismatch_is_rejected() {
        let grid = Grid1D::zero_flux(3, 1.0).unwrap();
        assert!(matches!(
            line_emd(&[1.0, 0.0, 0.0], &[0.0, 0.0, 2.0], &grid),
            Err(Error::TraceMismatch { .. })
        ));
    }

    #[test]
    fn pauli_dual_search_hits_one() {
        let l = LFamily::from_real(&[&[&[0.0, 1.0], &[1.0, 0.0]]]).unwrap();
        let r0 = DensityLikeMatrix::diag(&[1.0, 0.0]).unwrap();
        let r1 = DensityLikeMatrix::diag(&[0.0, 1.0]).unwrap();
        let v = dual_grid_search(&r0, &r1, &l, 2.0, 201, None).unwrap();
        assert!(v >= 1.0 - 1e-12 && v <= 1.0 + 1e-12, "{v}");
    }

    #[test]
    fn source_bound_with_alpha() {
        let l = LFamily::from_real(&[&[&[0.0, 1.0], &[1.0, 0.0]]]).unwrap();
        let r0 = DensityLikeMatrix::diag(&[0.3, 0.5]).unwrap();
        let r1 = DensityLikeMatrix::zeros(2);
        let v = dual_grid_search(&r0, &r1, &l, 2.0, 41, Some(1.0)).unwrap();
        assert!((v - 0.8).abs() < 1e-12, "{v}");
    }
}
