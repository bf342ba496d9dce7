//! Dense complex matrices and the handful of factorizations everything else
//! is built from.
//!
//! Numerical rank is always decided relative to the largest singular value
//! (or eigenvalue): a direction counts when it exceeds `tol * max`.

use std::fmt;

use faer::Side;
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;

/// Default tolerance for rank, membership and identity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Index pair `(rows, cols)` of a rectangular matrix space `M_{rows,cols}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Argument(format!(
                "shape must be at least 1x1, got {rows}x{cols}"
            )));
        }
        Ok(Shape { rows, cols })
    }

    pub fn square(n: usize) -> Result<Self> {
        Shape::new(n, n)
    }

    pub fn of(x: &ComplexMatrix) -> Self {
        Shape {
            rows: x.nrows(),
            cols: x.ncols(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transposed(&self) -> Self {
        Shape {
            rows: self.cols,
            cols: self.rows,
        }
    }

    pub fn zeros(&self) -> ComplexMatrix {
        ComplexMatrix::zeros(self.rows, self.cols)
    }

    /// Matrix unit `E_ij`.
    pub fn unit(&self, i: usize, j: usize) -> ComplexMatrix {
        let mut e = self.zeros();
        e[(i, j)] = C64::new(1.0, 0.0);
        e
    }

    /// Matrix units in row-major order `E_11, E_12, ...`.
    pub fn units(&self) -> impl Iterator<Item = ComplexMatrix> + '_ {
        (0..self.dim()).map(move |k| self.unit(k / self.cols, k % self.cols))
    }

    pub fn check(&self, x: &ComplexMatrix) -> Result<()> {
        if Shape::of(x) != *self {
            return Err(Error::dimension(self, Shape::of(x)));
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    ComplexMatrix::from_fn(r, c, |i, j| real(rows[i][j]))
}

pub fn diag_real(entries: &[f64]) -> ComplexMatrix {
    let n = entries.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { real(entries[i]) } else { C64::default() })
}

pub fn frobenius(x: &ComplexMatrix) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn op_norm(x: &ComplexMatrix) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    singular_values(x).first().copied().unwrap_or(0.0)
}

fn to_dense(a: &ComplexMatrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_dense(m: faer::MatRef<'_, C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `a = u diag(s) v*` with singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

fn svd_with(a: &ComplexMatrix, thin: bool) -> Svd {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        let k = if thin { 0 } else { r };
        let l = if thin { 0 } else { c };
        return Svd {
            u: identity(r).columns(0, k).clone_owned(),
            s: Vec::new(),
            v: identity(c).columns(0, l).clone_owned(),
        };
    }
    let dense = to_dense(a);
    let svd = if thin { dense.thin_svd() } else { dense.svd() }.expect("svd converges");
    Svd {
        u: from_dense(svd.U()),
        s: svd.S().column_vector().iter().map(|x| x.re).collect(),
        v: from_dense(svd.V()),
    }
}

/// Full decomposition: `u` and `v` are square unitaries.
pub fn svd(a: &ComplexMatrix) -> Svd {
    svd_with(a, false)
}

/// Thin decomposition: `u`, `v` have `min(rows, cols)` columns.
pub fn thin_svd(a: &ComplexMatrix) -> Svd {
    svd_with(a, true)
}

/// Singular values, descending.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_dense(a)
        .singular_values()
        .expect("svd converges")
}

/// Hermitian part `(h + h*)/2`.
pub fn hermitian_part(h: &ComplexMatrix) -> ComplexMatrix {
    (h + h.adjoint()) * real(0.5)
}

/// Eigen-decomposition of the Hermitian part of `h`, eigenvalues ascending.
pub fn hermitian_eigen(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), ComplexMatrix::zeros(0, 0));
    }
    let eig = to_dense(&hermitian_part(h))
        .self_adjoint_eigen(Side::Lower)
        .expect("eigen decomposition converges");
    let values = eig.S().column_vector().iter().map(|x| x.re).collect();
    (values, from_dense(eig.U()))
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> f64 {
    hermitian_eigen(h).0.first().copied().unwrap_or(0.0)
}

/// Orthogonal projector onto the span of the eigenvectors of a positive
/// semidefinite `h` whose eigenvalues exceed `tol * lambda_max`.
pub fn range_projector(h: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let n = h.nrows();
    let (values, vectors) = hermitian_eigen(h);
    let top = values.last().copied().unwrap_or(0.0);
    let mut p = ComplexMatrix::zeros(n, n);
    if top <= f64::MIN_POSITIVE {
        return p;
    }
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > tol * top {
            let v = vectors.column(k);
            p += v * v.adjoint();
        }
    }
    hermitian_part(&p)
}

/// Orthonormal basis (as columns) of the null space of `a`, relative to its
/// largest singular value.
pub fn null_space(a: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    null_space_with(a, |top| tol * top)
}

/// Null space with singular values at most `cutoff` treated as zero.
pub fn null_space_below(a: &ComplexMatrix, cutoff: f64) -> ComplexMatrix {
    null_space_with(a, |_| cutoff)
}

fn null_space_with(a: &ComplexMatrix, cutoff: impl Fn(f64) -> f64) -> ComplexMatrix {
    let c = a.ncols();
    if c == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return identity(c);
    }
    let svd = svd(a);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let bound = cutoff(top);
    let keep: Vec<usize> = (0..c)
        .filter(|&k| top <= f64::MIN_POSITIVE || svd.s.get(k).is_none_or(|&v| v <= bound))
        .collect();
    ComplexMatrix::from_fn(c, keep.len(), |i, j| svd.v[(i, keep[j])])
}

/// Numerical rank relative to the largest singular value.
pub fn rank(a: &ComplexMatrix, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    if top <= f64::MIN_POSITIVE {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * top).count()
}

/// Orthonormal basis of the orthogonal complement of the column span of `q`
/// (whose columns are assumed orthonormal), living in `C^{q.nrows()}`.
pub fn orthonormal_complement(q: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let n = q.nrows();
    if q.ncols() == 0 {
        return identity(n);
    }
    null_space(&q.adjoint(), tol)
}

/// Isometric factor `W` of the polar decomposition `x = W |x|`.
pub fn polar_isometry(x: &ComplexMatrix) -> ComplexMatrix {
    let svd = thin_svd(x);
    svd.u * svd.v.adjoint()
}

/// Orthonormal basis (as columns) of the column span of `a`, keeping the
/// left singular vectors whose singular value exceeds `tol * σ_max`.
pub fn column_range(a: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let rows = a.nrows();
    if a.ncols() == 0 || rows == 0 {
        return ComplexMatrix::zeros(rows, 0);
    }
    let svd = thin_svd(a);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let keep = svd.s.iter().take_while(|&&v| top > f64::MIN_POSITIVE && v > tol * top).count();
    svd.u.columns(0, keep).clone_owned()
}

/// Column orthonormal basis of the range of `h` (PSD), one column per
/// retained eigenvalue, largest first.
pub fn range_basis(h: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let n = h.nrows();
    let (values, vectors) = hermitian_eigen(h);
    let top = values.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..n)
        .rev()
        .filter(|&k| top > f64::MIN_POSITIVE && values[k] > tol * top)
        .collect();
    ComplexMatrix::from_fn(n, keep.len(), |i, j| vectors[(i, keep[j])])
}

/// Row-major flattening.
pub fn vectorize(x: &ComplexMatrix) -> DVector<C64> {
    let (r, c) = x.shape();
    DVector::from_fn(r * c, |k, _| x[(k / c, k % c)])
}

pub fn unvectorize(shape: Shape, v: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(shape.rows, shape.cols, |i, j| v[i * shape.cols + j])
}

pub fn block_diag(blocks: &[&ComplexMatrix]) -> ComplexMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Trace inner product `<x, y> = tr(x* y)`.
pub fn inner(x: &ComplexMatrix, y: &ComplexMatrix) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// `‖u u* u − u‖_F`.
pub fn partial_isometry_residual(u: &ComplexMatrix) -> f64 {
    frobenius(&(u * u.adjoint() * u - u))
}

/// The seedable generator used by every stochastic routine.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_gaussian(rows: usize, cols: usize, rng: &mut Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Top singular triple `(sigma, u, v)` with `x v = sigma u`.
pub fn top_singular(x: &ComplexMatrix) -> (f64, DVector<C64>, DVector<C64>) {
    let svd = thin_svd(x);
    (svd.s[0], svd.u.column(0).clone_owned(), svd.v.column(0).clone_owned())
}

/// `acc += c * x`.
pub fn add_scaled(acc: &mut ComplexMatrix, c: C64, x: &ComplexMatrix) {
    acc.zip_apply(x, |a, b| *a += c * b);
}

pub fn trace(x: &ComplexMatrix) -> C64 {
    x.diagonal().iter().copied().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&identity(3)) - 1.0).abs() < 1e-14);
        assert!((op_norm(&diag_real(&[2.0, 1.0])) - 2.0).abs() < 1e-14);
        let nil = from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert!((op_norm(&nil) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_wide_matrix_is_complete() {
        let a = from_real_rows(&[&[1.0, 1.0, 0.0]]);
        let n = null_space(&a, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!(frobenius(&(&a * &n)) < 1e-12);
        assert!(frobenius(&(n.adjoint() * &n - identity(2))) < 1e-12);
    }

    #[test]
    fn range_projector_of_rank_one() {
        let v = from_real_rows(&[&[1.0], &[1.0], &[0.0]]);
        let p = range_projector(&(&v * v.adjoint()), 1e-12);
        let expected = from_real_rows(&[&[0.5, 0.5, 0.0], &[0.5, 0.5, 0.0], &[0.0, 0.0, 0.0]]);
        assert!(frobenius(&(p - expected)) < 1e-12);
    }

    #[test]
    fn complement_spans_the_rest() {
        let q = from_real_rows(&[&[1.0], &[0.0], &[0.0]]);
        let c = orthonormal_complement(&q, 1e-12);
        assert_eq!(c.ncols(), 2);
        assert!(frobenius(&(q.adjoint() * &c)) < 1e-12);
    }

    #[test]
    fn shape_rejects_zero() {
        assert!(Shape::new(0, 2).is_err());
        assert_eq!(Shape::new(2, 3).unwrap().dim(), 6);
    }
}
