//! Matrix containers with structural invariants, the Hilbert–Schmidt inner
//! product, and the operator and nuclear norms.
//!
//! Block vectors are always normed as the vertically stacked `(K·n)×n`
//! matrix, so the nuclear and operator norms are an exact dual pair on the
//! block space.

use std::borrow::Cow;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Default tolerance for Hermitian / skew-Hermitian membership, relative to
/// the largest entry magnitude.
pub const TOL_STRUCT: f64 = 1e-12;

pub(crate) const I: C64 = Complex { re: 0.0, im: 1.0 };

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Structural tag carried by each block of a [`BlockVector`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Hermitian,
    Skew,
    General,
}

impl Structure {
    /// Largest entrywise deviation from the structure, relative to the
    /// largest entry magnitude (0 for the zero matrix).
    pub fn defect(self, m: &CMat) -> f64 {
        let sign = match self {
            Structure::General => return 0.0,
            Structure::Hermitian => 1.0,
            Structure::Skew => -1.0,
        };
        if !m.is_square() {
            return f64::INFINITY;
        }
        let scale = max_abs(m);
        if scale == 0.0 {
            return 0.0;
        }
        let n = m.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (m[(i, j)] - m[(j, i)].conj() * sign).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    /// Orthogonal projection of a square matrix onto the structure subspace.
    pub fn project(self, m: &CMat) -> CMat {
        match self {
            Structure::General => m.clone(),
            Structure::Hermitian => (m + m.adjoint()) * c(0.5, 0.0),
            Structure::Skew => (m - m.adjoint()) * c(0.5, 0.0),
        }
    }

    /// Real dimension of the structure subspace of `n×n` matrices.
    pub fn real_dim(self, n: usize) -> usize {
        match self {
            Structure::General => 2 * n * n,
            _ => n * n,
        }
    }
}

pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
}

fn check_structure(m: &CMat, tag: Structure, what: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!("{what} must be non-empty")));
    }
    let defect = tag.defect(m);
    if defect > TOL_STRUCT {
        return Err(Error::StructureViolation {
            what,
            defect,
            tolerance: TOL_STRUCT,
        });
    }
    Ok(())
}

/// An `n×n` Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    m: CMat,
}

impl HermitianMatrix {
    /// Validates membership; the entries are stored as given.
    pub fn new(m: CMat) -> Result<Self> {
        check_structure(&m, Structure::Hermitian, "hermitian matrix")?;
        Ok(Self { m })
    }

    /// Builds from row-major complex rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            m: CMat::from_fn(n, n, |i, j| if i == j { c(d[i], 0.0) } else { C64::default() }),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: CMat::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: CMat::zeros(n, n),
        }
    }

    /// Hermitian part of an arbitrary square matrix, for internally
    /// generated values whose structure holds by construction.
    pub(crate) fn from_hermitian_part(m: &CMat) -> Self {
        Self {
            m: Structure::Hermitian.project(m),
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_inner(self) -> CMat {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(Structure::Hermitian.project(&self.m))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: &self.m * c(s, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_shape(&self.m, &other.m)?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_shape(&self.m, &other.m)?;
        Ok(Self {
            m: &self.m - &other.m,
        })
    }

    /// Unitary conjugation `U X Uᴴ`.
    pub fn conjugate_by(&self, u: &CMat) -> Self {
        Self::from_hermitian_part(&(u * &self.m * u.adjoint()))
    }

    /// Splits into positive and negative parts, `self = pos − neg` with both
    /// positive semidefinite and mutually orthogonal.
    pub fn positive_negative_parts(&self) -> (Self, Self) {
        let n = self.n();
        let eig = SymmetricEigen::new(Structure::Hermitian.project(&self.m));
        let mut pos = CMat::zeros(n, n);
        let mut neg = CMat::zeros(n, n);
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let outer = &v * v.adjoint();
            if lambda > 0.0 {
                pos += outer * c(lambda, 0.0);
            } else if lambda < 0.0 {
                neg += outer * c(-lambda, 0.0);
            }
        }
        (
            Self::from_hermitian_part(&pos),
            Self::from_hermitian_part(&neg),
        )
    }
}

/// An `n×n` skew-Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewHermitianMatrix {
    m: CMat,
}

impl SkewHermitianMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        check_structure(&m, Structure::Skew, "skew-hermitian matrix")?;
        Ok(Self { m })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_inner(self) -> CMat {
        self.m
    }
}

/// A positive semidefinite Hermitian matrix, the container for marginals.
///
/// Unit trace is not enforced; balanced operations compare traces instead.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityLikeMatrix {
    base: HermitianMatrix,
    trace: f64,
}

impl DensityLikeMatrix {
    pub fn new(base: HermitianMatrix) -> Result<Self> {
        let trace = base.trace();
        if max_abs(base.matrix()) == 0.0 {
            return Ok(Self { base, trace: 0.0 });
        }
        if trace <= 0.0 {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: base.eigenvalues()[0],
                tolerance: 0.0,
            });
        }
        let tolerance = (1e-10 * trace).max(1e-12);
        let min_eigenvalue = base.eigenvalues()[0];
        if min_eigenvalue < -tolerance {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue,
                tolerance,
            });
        }
        Ok(Self { base, trace })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            base: HermitianMatrix::zeros(n),
            trace: 0.0,
        }
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::diag(d))
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn matrix(&self) -> &CMat {
        self.base.matrix()
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }
}

/// An ordered list of `K` same-size `n×n` blocks with per-block structure.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    blocks: Vec<CMat>,
    tags: Vec<Structure>,
}

impl BlockVector {
    pub fn new(blocks: Vec<CMat>, tags: Vec<Structure>) -> Result<Self> {
        if blocks.len() != tags.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks but {} structure tags",
                blocks.len(),
                tags.len()
            )));
        }
        if let Some(first) = blocks.first() {
            let n = first.nrows();
            for (b, &tag) in blocks.iter().zip(&tags) {
                if b.nrows() != n || b.ncols() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "block of shape {}x{} in a block vector of {n}x{n} blocks",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                check_structure(b, tag, "block")?;
            }
        }
        Ok(Self { blocks, tags })
    }

    /// Builds without validation; callers guarantee the structure.
    pub(crate) fn from_parts(blocks: Vec<CMat>, tags: Vec<Structure>) -> Self {
        debug_assert_eq!(blocks.len(), tags.len());
        Self { blocks, tags }
    }

    pub fn zeros(n: usize, tags: Vec<Structure>) -> Self {
        Self {
            blocks: vec![CMat::zeros(n, n); tags.len()],
            tags,
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn tags(&self) -> &[Structure] {
        &self.tags
    }

    /// The `(K·n)×n` matrix with blocks stacked in order.
    pub fn stack(&self) -> CMat {
        let n = self.n();
        let mut out = CMat::zeros(self.blocks.len() * n, n);
        for (k, b) in self.blocks.iter().enumerate() {
            out.view_mut((k * n, 0), (n, n)).copy_from(b);
        }
        out
    }

    /// Splits a stacked matrix back into blocks.
    pub fn unstack(stacked: &CMat, tags: Vec<Structure>) -> Result<Self> {
        let n = stacked.ncols();
        if stacked.nrows() != n * tags.len() {
            return Err(Error::ShapeMismatch(format!(
                "stacked matrix has {} rows, expected {}",
                stacked.nrows(),
                n * tags.len()
            )));
        }
        let blocks = (0..tags.len())
            .map(|k| stacked.view((k * n, 0), (n, n)).into_owned())
            .collect();
        Self::new(blocks, tags)
    }
}

/// Anything that can be viewed as a stacked complex matrix.
pub trait Stacked {
    fn stacked(&self) -> Cow<'_, CMat>;
}

impl Stacked for CMat {
    fn stacked(&self) -> Cow<'_, CMat> {
        Cow::Borrowed(self)
    }
}

impl Stacked for HermitianMatrix {
    fn stacked(&self) -> Cow<'_, CMat> {
        Cow::Borrowed(&self.m)
    }
}

impl Stacked for SkewHermitianMatrix {
    fn stacked(&self) -> Cow<'_, CMat> {
        Cow::Borrowed(&self.m)
    }
}

impl Stacked for DensityLikeMatrix {
    fn stacked(&self) -> Cow<'_, CMat> {
        Cow::Borrowed(self.base.matrix())
    }
}

impl Stacked for BlockVector {
    fn stacked(&self) -> Cow<'_, CMat> {
        Cow::Owned(self.stack())
    }
}

pub fn singular_values<M: Stacked + ?Sized>(m: &M) -> DVector<f64> {
    crate::linalg::singular_values(&m.stacked())
}

/// Gram entries `(‖m₀‖², ‖m₁‖², m₀ᴴm₁)` of a two-column matrix.
pub(crate) fn gram2(m: &CMat) -> (f64, f64, C64) {
    let (mut a, mut d, mut b) = (0.0, 0.0, c(0.0, 0.0));
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, 0)], m[(i, 1)]);
        a += x.norm_sqr();
        d += y.norm_sqr();
        b += x.conj() * y;
    }
    (a, d, b)
}

/// Largest Gram eigenvalue of a two-column matrix from its Gram entries.
pub(crate) fn gram2_top(a: f64, d: f64, b: C64) -> f64 {
    0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt()
}

/// Eigenvalues `λ₁ ≥ λ₂` of the Gram matrix of a two-column matrix. The
/// determinant is taken by Cauchy–Binet so that `λ₂` keeps full relative
/// accuracy when the columns are nearly parallel.
pub(crate) fn gram2_eigenvalues(m: &CMat) -> (f64, f64) {
    let (a, d, b) = gram2(m);
    let mut det = 0.0;
    for i in 0..m.nrows() {
        for j in i + 1..m.nrows() {
            det += (m[(i, 0)] * m[(j, 1)] - m[(j, 0)] * m[(i, 1)]).norm_sqr();
        }
    }
    let l1 = gram2_top(a, d, b);
    let l2 = if l1 > 0.0 { det / l1 } else { 0.0 };
    (l1, l2)
}

fn two_singular_values(m: &CMat) -> Option<(f64, f64)> {
    let (l1, l2) = if m.ncols() == 2 {
        gram2_eigenvalues(m)
    } else if m.nrows() == 2 {
        gram2_eigenvalues(&m.transpose())
    } else {
        return None;
    };
    Some((l1.sqrt(), l2.sqrt()))
}

/// Sum of singular values of the stacked matrix.
pub fn nuclear_norm<M: Stacked + ?Sized>(m: &M) -> f64 {
    if let Some((s1, s2)) = two_singular_values(&m.stacked()) {
        return s1 + s2;
    }
    singular_values(m).iter().sum()
}

/// Largest singular value of the stacked matrix.
pub fn operator_norm<M: Stacked + ?Sized>(m: &M) -> f64 {
    if let Some((s1, _)) = two_singular_values(&m.stacked()) {
        return s1;
    }
    singular_values(m).iter().fold(0.0, |a: f64, &s| a.max(s))
}

pub fn frobenius_norm<M: Stacked + ?Sized>(m: &M) -> f64 {
    m.stacked().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hilbert–Schmidt inner product `tr(Xᴴ Y)`; for block vectors this is the
/// sum of the blockwise products.
pub fn trace_inner<X: Stacked + ?Sized, Y: Stacked + ?Sized>(x: &X, y: &Y) -> Result<C64> {
    let (x, y) = (x.stacked(), y.stacked());
    same_shape(&x, &y)?;
    Ok(x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum())
}

fn same_shape(a: &CMat, b: &CMat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn matrix_from_rows(rows: &[Vec<C64>]) -> Result<CMat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != nc) {
        return Err(Error::ShapeMismatch(format!(
            "row {bad} has {} entries, expected {nc}",
            rows[bad].len()
        )));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| rows[i][j]))
}

// Isometric real coordinates of structured blocks. A Hermitian block uses
// the orthonormal basis E_ii, (E_ij + E_ji)/√2, i(E_ij − E_ji)/√2 (i < j); a
// skew block S is stored through the Hermitian block −iS. Reading
// coordinates from an arbitrary block is the orthogonal projection onto the
// structure subspace.

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Writes the coordinates of block rows `row0..row0+n` of `m` into `out`.
pub(crate) fn block_coords(m: &CMat, row0: usize, tag: Structure, out: &mut [f64]) {
    let n = m.ncols();
    let at = |i: usize, j: usize| m[(row0 + i, j)];
    match tag {
        Structure::General => {
            for (k, z) in (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).enumerate() {
                let v = at(z.0, z.1);
                out[2 * k] = v.re;
                out[2 * k + 1] = v.im;
            }
        }
        Structure::Hermitian | Structure::Skew => {
            // Skew blocks are rotated by −i first.
            let rot = if tag == Structure::Skew { c(0.0, -1.0) } else { c(1.0, 0.0) };
            let mut k = 0;
            for i in 0..n {
                out[k] = (rot * at(i, i)).re;
                k += 1;
            }
            for i in 0..n {
                for j in i + 1..n {
                    let h = (rot * at(i, j) + (rot * at(j, i)).conj()) * 0.5;
                    out[k] = SQRT2 * h.re;
                    out[k + 1] = SQRT2 * h.im;
                    k += 2;
                }
            }
        }
    }
}

/// Inverse of [`block_coords`]: writes a structured block into rows
/// `row0..row0+n` of `m`.
pub(crate) fn block_from_coords(coords: &[f64], tag: Structure, m: &mut CMat, row0: usize) {
    let n = m.ncols();
    match tag {
        Structure::General => {
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    m[(row0 + i, j)] = c(coords[2 * k], coords[2 * k + 1]);
                }
            }
        }
        Structure::Hermitian | Structure::Skew => {
            let rot = if tag == Structure::Skew { I } else { c(1.0, 0.0) };
            let mut k = 0;
            for i in 0..n {
                m[(row0 + i, i)] = rot * coords[k];
                k += 1;
            }
            for i in 0..n {
                for j in i + 1..n {
                    let h = c(coords[k], coords[k + 1]) / SQRT2;
                    m[(row0 + i, j)] = rot * h;
                    m[(row0 + j, i)] = rot * h.conj();
                    k += 2;
                }
            }
        }
    }
}

#[cfg(test)]
pub(crate) fn hermitian_coords(m: &CMat) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows() * m.nrows()];
    block_coords(m, 0, Structure::Hermitian, &mut out);
    out
}

pub(crate) fn hermitian_from_coords(coords: &[f64], n: usize) -> HermitianMatrix {
    let mut m = CMat::zeros(n, n);
    block_from_coords(coords, Structure::Hermitian, &mut m, 0);
    HermitianMatrix { m }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMat {
        matrix_from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]).unwrap()
    }

    fn pauli_y() -> CMat {
        matrix_from_rows(&[vec![c(0., 0.), c(0., 1.)], vec![c(0., -1.), c(0., 0.)]]).unwrap()
    }

    #[test]
    fn make_hermitian_accepts_and_rejects() {
        assert!(HermitianMatrix::new(CMat::identity(2, 2)).is_ok());
        assert!(HermitianMatrix::new(pauli_x()).is_ok());
        let bad = HermitianMatrix::from_real_rows(&[&[0., 1.], &[0., 0.]]);
        assert!(matches!(bad, Err(Error::StructureViolation { .. })));
        let not_square = HermitianMatrix::new(CMat::zeros(2, 3));
        assert!(matches!(not_square, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn make_hermitian_stores_entries_unchanged() {
        let mut m = pauli_x();
        m[(0, 1)] += c(1e-14, 0.0);
        let h = HermitianMatrix::new(m.clone()).unwrap();
        assert_eq!(h.matrix(), &m);
        let again = HermitianMatrix::new(h.matrix().clone()).unwrap();
        assert_eq!(again, h);
    }

    #[test]
    fn diagonal_imaginary_part_is_rejected() {
        let mut m = CMat::identity(2, 2);
        m[(0, 0)] = c(1.0, 1e-6);
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn nuclear_norm_examples() {
        assert!((nuclear_norm(&HermitianMatrix::diag(&[1., -2.])) - 3.0).abs() < 1e-14);
        assert_eq!(nuclear_norm(&CMat::zeros(3, 3)), 0.0);
        // [[0,-1/2],[1/2,0]]: MᴴM = I/4, so both singular values equal 1/2.
        let m = matrix_from_rows(&[vec![c(0., 0.), c(-0.5, 0.)], vec![c(0.5, 0.), c(0., 0.)]])
            .unwrap();
        assert!((nuclear_norm(&m) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&CMat::identity(2, 2)) - 1.0).abs() < 1e-14);
        assert!((operator_norm(&HermitianMatrix::diag(&[1., -2.])) - 2.0).abs() < 1e-14);
        let stacked = BlockVector::new(
            vec![CMat::identity(2, 2), CMat::identity(2, 2)],
            vec![Structure::Hermitian; 2],
        )
        .unwrap();
        assert!((operator_norm(&stacked) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn trace_inner_examples() {
        let id = CMat::identity(2, 2);
        assert_eq!(trace_inner(&id, &id).unwrap(), c(2.0, 0.0));
        assert_eq!(trace_inner(&pauli_x(), &pauli_y()).unwrap(), c(0.0, 0.0));
        assert!(matches!(
            trace_inner(&id, &CMat::identity(3, 3)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn density_like_validation() {
        assert!(DensityLikeMatrix::diag(&[0.5, 0.5]).is_ok());
        assert!(DensityLikeMatrix::new(HermitianMatrix::zeros(2)).is_ok());
        let err = DensityLikeMatrix::diag(&[1.5, -0.5]).unwrap_err();
        match err {
            Error::NotPositiveSemidefinite { min_eigenvalue, .. } => {
                assert!((min_eigenvalue + 0.5).abs() < 1e-12)
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(DensityLikeMatrix::diag(&[1.0, -1e-14]).is_ok());
    }

    #[test]
    fn coordinates_are_isometric_projections() {
        let m = matrix_from_rows(&[
            vec![c(1.0, 0.3), c(2.0, -1.0)],
            vec![c(-0.5, 0.25), c(0.7, -0.2)],
        ])
        .unwrap();
        for tag in [Structure::Hermitian, Structure::Skew, Structure::General] {
            let mut coords = vec![0.0; tag.real_dim(2)];
            block_coords(&m, 0, tag, &mut coords);
            let mut back = CMat::zeros(2, 2);
            block_from_coords(&coords, tag, &mut back, 0);
            let proj = tag.project(&m);
            assert!((&back - &proj).norm() < 1e-14, "{tag:?}");
            let norm2: f64 = coords.iter().map(|x| x * x).sum();
            assert!((norm2 - proj.norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_negative_split() {
        let h = HermitianMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, -1.0]]).unwrap();
        let (p, q) = h.positive_negative_parts();
        assert!((p.sub(&q).unwrap().matrix() - h.matrix()).norm() < 1e-12);
        assert!(p.eigenvalues()[0] > -1e-12 && q.eigenvalues()[0] > -1e-12);
        assert!(trace_inner(&p, &q).unwrap().norm() < 1e-12);
    }
}
