//! Dense singular value decompositions.
//!
//! These go through faer: nalgebra's bidiagonal SVD was observed to lose
//! four digits on the exactly structured, rank-deficient constraint
//! matrices assembled here (tall orientation), which breaks the projection.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::matrix::{CMat, C64};

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Singular values paired with left singular vectors, one per row of `a`
/// (rows beyond the rank of the shape get singular value zero).
pub(crate) fn left_singular_pairs(a: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    if a.ncols() == 0 {
        return (0..a.nrows()).map(|j| (0.0, DVector::from_fn(a.nrows(), |i, _| f64::from(u8::from(i == j))))).collect();
    }
    let svd = to_faer(a).svd().expect("dense SVD converges");
    let (u, s) = (svd.U(), svd.S().column_vector());
    (0..a.nrows())
        .map(|j| {
            let sigma = if j < s.nrows() { s[j] } else { 0.0 };
            (sigma, DVector::from_fn(a.nrows(), |i, _| u[(i, j)]))
        })
        .collect()
}

/// Singular values paired with right singular vectors, one per column of `a`.
pub(crate) fn right_singular_pairs(a: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    left_singular_pairs(&a.transpose())
}

/// Singular values of a complex matrix, in decreasing order.
pub(crate) fn singular_values(m: &CMat) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    let fm: Mat<C64> = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    DVector::from_vec(fm.singular_values().expect("dense SVD converges"))
}
