//! Linear maps `T: M_{m,n} -> M_{r,s}` stored by their action on matrix units.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{add_scaled, unvectorize, vectorize, ComplexMatrix, Shape, C64};

/// A linear map between rectangular matrix spaces.
///
/// `action[k]` is the image of the `k`-th matrix unit of the domain in
/// row-major order, i.e. `action[i * n + j] = T(E_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMap {
    domain: Shape,
    codomain: Shape,
    action: Vec<ComplexMatrix>,
}

impl MatrixMap {
    pub fn new(domain: Shape, codomain: Shape, action: Vec<ComplexMatrix>) -> Result<Self> {
        if action.len() != domain.dim() {
            return Err(Error::dimension(
                format!("{} action entries", domain.dim()),
                action.len(),
            ));
        }
        for image in &action {
            codomain.check(image)?;
        }
        Ok(MatrixMap {
            domain,
            codomain,
            action,
        })
    }

    /// Builds the map from a closure evaluated on each matrix unit.
    pub fn from_fn<F>(domain: Shape, codomain: Shape, f: F) -> Result<Self>
    where
        F: Fn(&ComplexMatrix) -> ComplexMatrix,
    {
        MatrixMap::new(domain, codomain, domain.units().map(|e| f(&e)).collect())
    }

    pub fn identity(shape: Shape) -> Self {
        MatrixMap {
            domain: shape,
            codomain: shape,
            action: shape.units().collect(),
        }
    }

    pub fn zero(domain: Shape, codomain: Shape) -> Self {
        MatrixMap {
            domain,
            codomain,
            action: vec![codomain.zeros(); domain.dim()],
        }
    }

    pub fn transpose(shape: Shape) -> Self {
        MatrixMap {
            domain: shape,
            codomain: shape.transposed(),
            action: shape.units().map(|e| e.transpose()).collect(),
        }
    }

    /// `x -> left * x * right`.
    pub fn sandwich(domain: Shape, left: &ComplexMatrix, right: &ComplexMatrix) -> Result<Self> {
        if left.ncols() != domain.rows || right.nrows() != domain.cols {
            return Err(Error::dimension(
                format!("factors compatible with {domain}"),
                format!("{}x{} and {}x{}", left.nrows(), left.ncols(), right.nrows(), right.ncols()),
            ));
        }
        let codomain = Shape::new(left.nrows(), right.ncols())?;
        MatrixMap::from_fn(domain, codomain, |e| left * e * right)
    }

    pub fn domain(&self) -> Shape {
        self.domain
    }

    pub fn codomain(&self) -> Shape {
        self.codomain
    }

    pub fn action(&self) -> &[ComplexMatrix] {
        &self.action
    }

    /// `T(E_ij)`.
    pub fn image_of_unit(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.action[i * self.domain.cols + j]
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.domain.check(x)?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.codomain.zeros();
        for (coeff, image) in x.transpose().iter().zip(&self.action) {
            if *coeff != C64::default() {
                add_scaled(&mut out, *coeff, image);
            }
        }
        out
    }

    /// Matrix of the map on row-major vectorizations: `rs x mn`.
    pub fn action_matrix(&self) -> ComplexMatrix {
        let rows = self.codomain.dim();
        let mut a = ComplexMatrix::zeros(rows, self.domain.dim());
        for (k, image) in self.action.iter().enumerate() {
            a.set_column(k, &vectorize(image));
        }
        a
    }

    pub fn from_action_matrix(domain: Shape, codomain: Shape, a: &ComplexMatrix) -> Result<Self> {
        if a.shape() != (codomain.dim(), domain.dim()) {
            return Err(Error::dimension(
                format!("{}x{}", codomain.dim(), domain.dim()),
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        let action = (0..domain.dim())
            .map(|k| unvectorize(codomain, a.column(k).as_slice()))
            .collect();
        MatrixMap::new(domain, codomain, action)
    }

    /// Frobenius norm of the action tensor.
    pub fn action_norm(&self) -> f64 {
        self.action
            .iter()
            .map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, factor: C64) -> Self {
        MatrixMap {
            domain: self.domain,
            codomain: self.codomain,
            action: self.action.iter().map(|m| m * factor).collect(),
        }
    }

    pub fn add(&self, other: &MatrixMap) -> Result<Self> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(Error::dimension(
                format!("{} -> {}", self.domain, self.codomain),
                format!("{} -> {}", other.domain, other.codomain),
            ));
        }
        Ok(MatrixMap {
            domain: self.domain,
            codomain: self.codomain,
            action: self.action.iter().zip(&other.action).map(|(a, b)| a + b).collect(),
        })
    }

    /// `x -> left * T(x) * right`.
    pub fn compress(&self, left: &ComplexMatrix, right: &ComplexMatrix) -> Result<Self> {
        if left.ncols() != self.codomain.rows || right.nrows() != self.codomain.cols {
            return Err(Error::dimension(
                format!("factors compatible with {}", self.codomain),
                format!("{}x{} and {}x{}", left.nrows(), left.ncols(), right.nrows(), right.ncols()),
            ));
        }
        let codomain = Shape::new(left.nrows(), right.ncols())?;
        MatrixMap::new(
            self.domain,
            codomain,
            self.action.iter().map(|m| left * m * right).collect(),
        )
    }

    /// Largest Frobenius distance between the two action tensors, entry by entry.
    pub fn max_action_distance(&self, other: &MatrixMap) -> f64 {
        self.action
            .iter()
            .zip(&other.action)
            .map(|(a, b)| crate::matrix::frobenius(&(a - b)))
            .fold(0.0, f64::max)
    }
}

/// `id_k ⊗ T` on `M_{km,kn} -> M_{kr,ks}`, materialized as a [`MatrixMap`].
pub fn amplify(map: &MatrixMap, k: usize) -> Result<MatrixMap> {
    if k == 0 {
        return Err(Error::Argument("amplification level must be at least 1".into()));
    }
    let (m, n) = (map.domain.rows, map.domain.cols);
    let (r, s) = (map.codomain.rows, map.codomain.cols);
    let domain = Shape::new(k * m, k * n)?;
    let codomain = Shape::new(k * r, k * s)?;
    let action = (0..domain.dim())
        .map(|idx| {
            let (row, col) = (idx / domain.cols, idx % domain.cols);
            let (a, i) = (row / m, row % m);
            let (b, j) = (col / n, col % n);
            let mut out = codomain.zeros();
            out.view_mut((a * r, b * s), (r, s))
                .copy_from(map.image_of_unit(i, j));
            out
        })
        .collect();
    MatrixMap::new(domain, codomain, action)
}

/// `x -> T(x*)*`, a map `M_{n,m} -> M_{s,r}`.
pub fn adjoint_map(map: &MatrixMap) -> MatrixMap {
    let domain = map.domain.transposed();
    let codomain = map.codomain.transposed();
    let action = (0..domain.dim())
        .map(|k| {
            let (i, j) = (k / domain.cols, k % domain.cols);
            map.image_of_unit(j, i).adjoint()
        })
        .collect();
    MatrixMap {
        domain,
        codomain,
        action,
    }
}

/// Lazy `id_k ⊗ T`: applies the base map block by block without building the
/// `k²mn`-entry action tensor.
#[derive(Debug, Clone)]
pub struct AmplifiedMap<'a> {
    base: &'a MatrixMap,
    level: usize,
    action: ComplexMatrix,
    adjoint_action: ComplexMatrix,
}

impl<'a> AmplifiedMap<'a> {
    pub fn new(base: &'a MatrixMap, level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::Argument("amplification level must be at least 1".into()));
        }
        let action = base.action_matrix();
        Ok(AmplifiedMap {
            base,
            level,
            adjoint_action: action.adjoint(),
            action,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn base(&self) -> &MatrixMap {
        self.base
    }

    pub fn domain(&self) -> Shape {
        let d = self.base.domain;
        Shape {
            rows: d.rows * self.level,
            cols: d.cols * self.level,
        }
    }

    pub fn codomain(&self) -> Shape {
        let c = self.base.codomain;
        Shape {
            rows: c.rows * self.level,
            cols: c.cols * self.level,
        }
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.domain().check(x)?;
        Ok(self.blockwise(x, &self.action, self.base.domain, self.base.codomain))
    }

    /// Hilbert–Schmidt adjoint `(id_k ⊗ T)^†`, used for gradients.
    pub fn apply_hs_adjoint(&self, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.codomain().check(y)?;
        Ok(self.blockwise(y, &self.adjoint_action, self.base.codomain, self.base.domain))
    }

    fn blockwise(&self, x: &ComplexMatrix, a: &ComplexMatrix, from: Shape, to: Shape) -> ComplexMatrix {
        let k = self.level;
        let mut stacked = DMatrix::<C64>::zeros(from.dim(), k * k);
        for bi in 0..k {
            for bj in 0..k {
                let block = x.view((bi * from.rows, bj * from.cols), (from.rows, from.cols));
                let col = bi * k + bj;
                for i in 0..from.rows {
                    for j in 0..from.cols {
                        stacked[(i * from.cols + j, col)] = block[(i, j)];
                    }
                }
            }
        }
        let images = a * stacked;
        let mut out = ComplexMatrix::zeros(k * to.rows, k * to.cols);
        for bi in 0..k {
            for bj in 0..k {
                let col = bi * k + bj;
                for i in 0..to.rows {
                    for j in 0..to.cols {
                        out[(bi * to.rows + i, bj * to.cols + j)] = images[(i * to.cols + j, col)];
                    }
                }
            }
        }
        out
    }
}
