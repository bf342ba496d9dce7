//! Subspaces of matrix spaces and the finite-dimensional ideal theory used
//! by the envelope construction: triple and C*-closures, left/right
//! C*-algebras, support projections, quotient compressions `(1-f) x (1-e)`,
//! and commutants.
//!
//! The bidual of a finite-dimensional algebra is the algebra itself, so
//! every support projection here is an honest matrix.

use crate::error::{Error, Result};
use crate::linmap::MatrixMap;
use crate::matrix::{
    add_scaled, column_range, frobenius, hermitian_part, identity, inner, null_space, null_space_below, range_projector, rank, real, unvectorize, vectorize,
    ComplexMatrix, Shape,
};
use crate::report::CheckReport;

/// Orthonormal (trace inner product) basis of a subspace of `M_{r,s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSubspace {
    ambient: Shape,
    basis: Vec<ComplexMatrix>,
}

impl MatrixSubspace {
    pub fn zero(ambient: Shape) -> Self {
        MatrixSubspace {
            ambient,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient: Shape) -> Self {
        MatrixSubspace {
            ambient,
            basis: ambient.units().collect(),
        }
    }

    /// Span of `generators`: the left singular vectors of the stacked
    /// generators whose singular value exceeds `tol * σ_max`. Sequential
    /// Gram–Schmidt can smear a near-dependency over several steps, so rank
    /// is decided on the whole family at once.
    pub fn span<I>(ambient: Shape, generators: I, tol: f64) -> Result<Self>
    where
        I: IntoIterator<Item = ComplexMatrix>,
    {
        let gens: Vec<ComplexMatrix> = generators.into_iter().collect();
        for g in &gens {
            ambient.check(g)?;
        }
        let cols: Vec<_> = gens.iter().map(vectorize).collect();
        if cols.is_empty() {
            return Ok(MatrixSubspace::zero(ambient));
        }
        let range = column_range(&ComplexMatrix::from_columns(&cols), tol);
        let basis = range
            .column_iter()
            .map(|c| unvectorize(ambient, c.as_slice()))
            .collect();
        Ok(MatrixSubspace { ambient, basis })
    }

    pub fn ambient(&self) -> Shape {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut p = self.ambient.zeros();
        for q in &self.basis {
            add_scaled(&mut p, inner(q, x), q);
        }
        p
    }

    /// `‖x - proj(x)‖_F`.
    pub fn residual(&self, x: &ComplexMatrix) -> f64 {
        frobenius(&self.orthogonal_part(x))
    }

    fn orthogonal_part(&self, x: &ComplexMatrix) -> ComplexMatrix {
        // Two passes of Gram–Schmidt keep the residual orthogonal to working precision.
        let mut r = x.clone();
        for _ in 0..2 {
            for q in &self.basis {
                let c = inner(q, &r);
                add_scaled(&mut r, -c, q);
            }
        }
        r
    }

    pub fn contains(&self, x: &ComplexMatrix, tol: f64) -> bool {
        self.residual(x) <= tol * frobenius(x)
    }

    /// Adds `x` if its residual exceeds `tol * reference`; returns whether it
    /// was added.
    pub fn insert_scaled(&mut self, x: &ComplexMatrix, reference: f64, tol: f64) -> bool {
        if self.basis.len() >= self.ambient.dim() {
            return false;
        }
        let r = self.orthogonal_part(x);
        let norm = frobenius(&r);
        if norm <= tol * reference.max(frobenius(x)) || norm <= f64::MIN_POSITIVE {
            return false;
        }
        self.basis.push(r * real(1.0 / norm));
        true
    }

    pub fn insert(&mut self, x: &ComplexMatrix, tol: f64) -> bool {
        self.insert_scaled(x, frobenius(x), tol)
    }

    /// `{x* : x in self}`.
    pub fn adjoint(&self) -> MatrixSubspace {
        MatrixSubspace {
            ambient: self.ambient.transposed(),
            basis: self.basis.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn sum(&self, other: &MatrixSubspace, tol: f64) -> Result<MatrixSubspace> {
        if self.ambient != other.ambient {
            return Err(Error::dimension(self.ambient, other.ambient));
        }
        let mut out = self.clone();
        for b in &other.basis {
            out.insert_scaled(b, 1.0, tol);
        }
        Ok(out)
    }

    /// Columns are the vectorized basis elements.
    pub fn basis_matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.ambient.dim(), self.dim());
        for (k, b) in self.basis.iter().enumerate() {
            m.set_column(k, &vectorize(b));
        }
        m
    }

    pub fn intersection(&self, other: &MatrixSubspace, tol: f64) -> Result<MatrixSubspace> {
        if self.ambient != other.ambient {
            return Err(Error::dimension(self.ambient, other.ambient));
        }
        if self.is_zero() || other.is_zero() {
            return Ok(MatrixSubspace::zero(self.ambient));
        }
        let a = self.basis_matrix();
        let b = other.basis_matrix();
        let mut stacked = ComplexMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
        stacked.view_mut((0, 0), a.shape()).copy_from(&a);
        stacked.view_mut((0, a.ncols()), b.shape()).copy_from(&(-b));
        let kernel = null_space(&stacked, tol);
        let coeffs = kernel.rows(0, a.ncols());
        let vectors = &a * coeffs;
        let gens = (0..vectors.ncols())
            .map(|k| unvectorize(self.ambient, vectors.column(k).clone_owned().as_slice()));
        MatrixSubspace::span(self.ambient, gens, tol)
    }

    /// Largest basis residual of `self` against `other` (0 iff `self ⊆ other`).
    pub fn excess_over(&self, other: &MatrixSubspace) -> f64 {
        self.basis.iter().map(|b| other.residual(b)).fold(0.0, f64::max)
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner(a, b) - real(target)).norm());
            }
        }
        worst
    }
}

/// Hermitian idempotent in a square matrix algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    matrix: ComplexMatrix,
}

impl Projection {
    pub const TOL: f64 = 1e-9;

    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Structure("projection must be square".into()));
        }
        let herm = frobenius(&(&matrix - matrix.adjoint()));
        let idem = frobenius(&(&matrix * &matrix - &matrix));
        if herm > Self::TOL || idem > Self::TOL {
            return Err(Error::Structure(format!(
                "not a projection (hermiticity residual {herm:.2e}, idempotence residual {idem:.2e})"
            )));
        }
        Ok(Projection { matrix })
    }

    pub fn zero(n: usize) -> Self {
        Projection {
            matrix: ComplexMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Projection {
            matrix: identity(n),
        }
    }

    /// Projection onto the range of the positive semidefinite `h`.
    pub fn range_of(h: &ComplexMatrix, tol: f64) -> Self {
        Projection {
            matrix: range_projector(h, tol),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        crate::matrix::trace(&self.matrix).re.round().max(0.0) as usize
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    /// `1 - p`.
    pub fn complement(&self) -> Projection {
        Projection {
            matrix: identity(self.dim()) - &self.matrix,
        }
    }

    /// Orthonormal columns spanning the range.
    pub fn range_basis(&self) -> ComplexMatrix {
        crate::matrix::range_basis(&self.matrix, 0.5)
    }
}

/// Largest residual of `u v* w` against `space` over all basis triples.
pub fn triple_residual(space: &MatrixSubspace) -> f64 {
    let b = space.basis();
    let mut worst: f64 = 0.0;
    for x in b {
        for y in b {
            let xy = x * y.adjoint();
            for z in b {
                worst = worst.max(space.residual(&(&xy * z)));
            }
        }
    }
    worst
}

pub fn is_triple_system(space: &MatrixSubspace, tol: f64) -> bool {
    triple_residual(space) <= tol
}

/// Largest residual of `{x*}` and `{xy}` against `space` over basis elements.
pub fn star_algebra_residual(space: &MatrixSubspace) -> f64 {
    let b = space.basis();
    let mut worst: f64 = 0.0;
    for x in b {
        worst = worst.max(space.residual(&x.adjoint()));
        for y in b {
            worst = worst.max(space.residual(&(x * y)));
        }
    }
    worst
}

/// Span of all finite products of elements of `generators` (square ambient).
/// When the generating set is `*`-closed the result is the C*-algebra it
/// generates.
pub fn algebra_closure(generators: &MatrixSubspace, tol: f64) -> Result<MatrixSubspace> {
    let ambient = generators.ambient();
    if !ambient.is_square() {
        return Err(Error::Structure(format!("ambient {ambient} is not square")));
    }
    let gens = generators.basis().to_vec();
    let mut closure = generators.clone();
    let mut frontier = gens.clone();
    while !frontier.is_empty() && closure.dim() < ambient.dim() {
        let mut next = Vec::new();
        for d in &frontier {
            for g in &gens {
                let candidate = d * g;
                if closure.insert_scaled(&candidate, 1.0, tol) {
                    next.push(closure.basis().last().cloned().expect("just inserted"));
                }
            }
        }
        frontier = next;
    }
    Ok(closure)
}

/// Smallest `*`-closed, product-closed subspace containing `seed`.
pub fn cstar_closure(seed: &MatrixSubspace, tol: f64) -> Result<MatrixSubspace> {
    let generators = seed.sum(&seed.adjoint_in_place_ambient()?, tol)?;
    algebra_closure(&generators, tol)
}

impl MatrixSubspace {
    fn adjoint_in_place_ambient(&self) -> Result<MatrixSubspace> {
        if !self.ambient.is_square() {
            return Err(Error::Structure(format!(
                "ambient {} is not square",
                self.ambient
            )));
        }
        Ok(self.adjoint())
    }
}

/// `span{x_i* x_j}` over a basis of `space`.
pub fn right_products(space: &MatrixSubspace, tol: f64) -> MatrixSubspace {
    let ambient = Shape {
        rows: space.ambient().cols,
        cols: space.ambient().cols,
    };
    let mut out = MatrixSubspace::zero(ambient);
    for x in space.basis() {
        for y in space.basis() {
            out.insert_scaled(&(x.adjoint() * y), 1.0, tol);
        }
    }
    out
}

/// `span{x_i x_j*}` over a basis of `space`.
pub fn left_products(space: &MatrixSubspace, tol: f64) -> MatrixSubspace {
    let ambient = Shape {
        rows: space.ambient().rows,
        cols: space.ambient().rows,
    };
    let mut out = MatrixSubspace::zero(ambient);
    for x in space.basis() {
        for y in space.basis() {
            out.insert_scaled(&(x * y.adjoint()), 1.0, tol);
        }
    }
    out
}

/// Smallest subspace containing `seed` and closed under `(x, y, z) -> x y* z`.
///
/// Every odd word `x1 x2* x3 ... x_{2k+1}` factors as `x1 d` with `d` in
/// the algebra generated by `{xi* xj}`, so the closure is
/// `seed + seed · alg(seed* seed)`.
pub fn triple_closure(seed: &MatrixSubspace, tol: f64) -> Result<MatrixSubspace> {
    let right = algebra_closure(&right_products(seed, tol), tol)?;
    let mut out = seed.clone();
    for x in seed.basis() {
        for d in right.basis() {
            out.insert_scaled(&(x * d), 1.0, tol);
        }
    }
    Ok(out)
}

/// The left and right C*-algebras `(Z Z*, Z* Z)` of a triple system.
pub fn left_right_cstar(z: &MatrixSubspace, tol: f64) -> Result<(MatrixSubspace, MatrixSubspace)> {
    let residual = triple_residual(z);
    if residual > tol {
        return Err(Error::Structure(format!(
            "not a triple system (Z Z* Z residual {residual:.2e})"
        )));
    }
    Ok((left_products(z, tol), right_products(z, tol)))
}

/// Projection onto the joint column space of the basis: the left support
/// `range(Σ b b*)`. Taken from singular values of `[b_1 b_2 …]` rather than
/// eigenvalues of the sum, which would square small directions away.
pub fn left_support(space: &MatrixSubspace, tol: f64) -> Projection {
    let n = space.ambient().rows;
    let width = space.ambient().cols * space.dim();
    let mut stacked = ComplexMatrix::zeros(n, width);
    for (k, b) in space.basis().iter().enumerate() {
        stacked.view_mut((0, k * b.ncols()), b.shape()).copy_from(b);
    }
    let range = column_range(&stacked, tol);
    Projection {
        matrix: hermitian_part(&(&range * range.adjoint())),
    }
}

/// Projection onto the range of `Σ b* b`: the right support.
pub fn right_support(space: &MatrixSubspace, tol: f64) -> Projection {
    left_support(&space.adjoint(), tol)
}

/// Unit of a finite-dimensional C*-algebra `ideal` sitting (possibly
/// non-unitally) inside its ambient matrix algebra.
pub fn support_projection(ideal: &MatrixSubspace, tol: f64) -> Result<Projection> {
    if !ideal.ambient().is_square() {
        return Err(Error::Structure("support projection needs a square ambient".into()));
    }
    let residual = star_algebra_residual(ideal);
    if residual > tol {
        return Err(Error::Structure(format!(
            "subspace is not a *-algebra (residual {residual:.2e})"
        )));
    }
    Ok(left_support(ideal, tol))
}

/// Concrete model of `B/(J + K)` as the corner map `x -> (1-f) x (1-e)`.
#[derive(Debug, Clone)]
pub struct QuotientCompression {
    /// `J = M_B e`.
    pub e: Projection,
    /// `K = f M_B`.
    pub f: Projection,
    /// `dim(J + K)`.
    pub sum_dim: usize,
    /// Dimension of the kernel of the compression.
    pub kernel_dim: usize,
}

impl QuotientCompression {
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.f.complement().matrix() * x * self.e.complement().matrix()
    }

    pub fn as_map(&self) -> MatrixMap {
        let n = self.e.dim();
        let shape = Shape { rows: n, cols: n };
        MatrixMap::from_fn(shape, shape, |x| self.apply(x)).expect("square shape")
    }
}

fn left_ideal_residual(ambient: Shape, j: &MatrixSubspace) -> f64 {
    let mut worst: f64 = 0.0;
    for b in ambient.units() {
        for x in j.basis() {
            worst = worst.max(j.residual(&(&b * x)));
        }
    }
    worst
}

fn right_ideal_residual(ambient: Shape, k: &MatrixSubspace) -> f64 {
    let mut worst: f64 = 0.0;
    for b in ambient.units() {
        for x in k.basis() {
            worst = worst.max(k.residual(&(x * &b)));
        }
    }
    worst
}

/// Support projections of a left ideal `J` and a right ideal `K` of `M_B`
/// and the compression realizing `M_B / (J + K)`.
pub fn quotient_compression(
    b_dim: Shape,
    j: &MatrixSubspace,
    k: &MatrixSubspace,
    tol: f64,
) -> Result<QuotientCompression> {
    if !b_dim.is_square() {
        return Err(Error::Structure(format!("{b_dim} is not a square algebra")));
    }
    if j.ambient() != b_dim || k.ambient() != b_dim {
        return Err(Error::dimension(b_dim, format!("{} and {}", j.ambient(), k.ambient())));
    }
    let lj = left_ideal_residual(b_dim, j);
    if lj > tol {
        return Err(Error::Structure(format!("J is not a left ideal (residual {lj:.2e})")));
    }
    let rk = right_ideal_residual(b_dim, k);
    if rk > tol {
        return Err(Error::Structure(format!("K is not a right ideal (residual {rk:.2e})")));
    }
    let e = right_support(j, tol);
    let f = left_support(k, tol);
    let sum_dim = j.sum(k, tol)?.dim();
    let mut out = QuotientCompression {
        e,
        f,
        sum_dim,
        kernel_dim: 0,
    };
    let map = out.as_map();
    out.kernel_dim = b_dim.dim() - rank(&map.action_matrix(), tol);
    Ok(out)
}

/// Checks that, for a C*-subalgebra `A` of `M_B` and an ideal `I` of `A`,
/// `J = M_B I` meets `A` exactly in `I` and that `a -> (1-p) a (1-p)` is a
/// `*`-homomorphism on `A` with kernel `I`.
pub fn verify_leftdid(
    b_dim: Shape,
    a: &MatrixSubspace,
    i: &MatrixSubspace,
    tol: f64,
) -> Result<CheckReport> {
    if a.ambient() != b_dim || i.ambient() != b_dim {
        return Err(Error::dimension(b_dim, format!("{} and {}", a.ambient(), i.ambient())));
    }
    let mut report = CheckReport::new();
    report.push("A is a *-algebra", star_algebra_residual(a), tol);
    report.push("I is contained in A", i.excess_over(a), tol);
    let mut ideal: f64 = 0.0;
    for x in a.basis() {
        for y in i.basis() {
            ideal = ideal.max(i.residual(&(x * y))).max(i.residual(&(y * x)));
        }
    }
    report.push("I is a two-sided ideal of A", ideal, tol);

    let j = MatrixSubspace::span(
        b_dim,
        b_dim
            .units()
            .flat_map(|e| i.basis().iter().map(move |y| &e * y).collect::<Vec<_>>()),
        tol,
    )?;
    let meet = j.intersection(a, tol)?;
    report.push(
        "dim(J ∩ A) = dim I",
        (meet.dim() as f64 - i.dim() as f64).abs(),
        0.5,
    );
    report.push("J ∩ A is contained in I", meet.excess_over(i), tol);

    let p = left_support(i, tol);
    let c = p.complement();
    let c = c.matrix();
    let compress = |x: &ComplexMatrix| c * x * c;
    let mut mult: f64 = 0.0;
    let mut central: f64 = 0.0;
    for x in a.basis() {
        central = central.max(frobenius(&(p.matrix() * x - x * p.matrix())));
        for y in a.basis() {
            mult = mult.max(frobenius(&(compress(x) * compress(y) - compress(&(x * y)))));
        }
    }
    report.push("support of I commutes with A", central, tol);
    report.push("compression is multiplicative on A", mult, tol);

    let images = MatrixSubspace::span(b_dim, a.basis().iter().map(compress), tol)?;
    let kernel_dim = a.dim() - images.dim();
    report.push(
        "kernel of compression on A has dim I",
        (kernel_dim as f64 - i.dim() as f64).abs(),
        0.5,
    );
    Ok(report)
}

/// `{X : M X = X M for every M in mats}`; singular values of the commutator
/// system up to `tol` times the largest `‖M‖_F` count as zero.
pub fn commutant(mats: &[ComplexMatrix], tol: f64) -> Result<MatrixSubspace> {
    let n = mats.first().map_or(0, |m| m.nrows());
    if n == 0 {
        return Err(Error::Argument("commutant of an empty family".into()));
    }
    let id = identity(n);
    let mut blocks = Vec::with_capacity(mats.len());
    for m in mats {
        if m.shape() != (n, n) {
            return Err(Error::dimension(format!("{n}x{n}"), Shape::of(m)));
        }
        // Row-major vec(M X - X M) = (M ⊗ I - I ⊗ Mᵀ) vec(X).
        blocks.push(m.kronecker(&id) - id.kronecker(&m.transpose()));
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut stacked = ComplexMatrix::zeros(rows, n * n);
    let mut offset = 0;
    for b in &blocks {
        stacked.view_mut((offset, 0), b.shape()).copy_from(b);
        offset += b.nrows();
    }
    let reach = mats.iter().map(frobenius).fold(0.0, f64::max);
    let kernel = null_space_below(&stacked, tol * reach);
    let shape = Shape { rows: n, cols: n };
    MatrixSubspace::span(
        shape,
        (0..kernel.ncols()).map(|k| unvectorize(shape, kernel.column(k).clone_owned().as_slice())),
        tol,
    )
}
