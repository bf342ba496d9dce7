//! Seeded generators of maps with known structure.
//!
//! Complete isometries are built as `T(x) = U diag{x, …, x, S0(x)} V` where
//! `S0` is a scaled convex combination of contractive sandwiches
//! `x -> A P x Q* B`, so complete contractivity holds by construction and
//! never depends on a solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmap::MatrixMap;
use crate::matrix::{
    block_diag, column_range, frobenius, identity, op_norm, random_gaussian, real, seeded_rng, ComplexMatrix,
    Rng, Shape, C64,
};
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub domain: Shape,
    pub codomain: Shape,
    pub multiplicity: usize,
    /// cb norm bound of the complementary block, in `[0, 1)`.
    pub contraction_scale: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(
        (m, n): (usize, usize),
        (r, s): (usize, usize),
        multiplicity: usize,
        contraction_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let spec = GenSpec {
            domain: Shape::new(m, n)?,
            codomain: Shape::new(r, s)?,
            multiplicity,
            contraction_scale,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, c, k) = (self.domain, self.codomain, self.multiplicity);
        if k * d.rows > c.rows || k * d.cols > c.cols {
            return Err(Error::Argument(format!(
                "{k} copies of {d} do not fit in {c}"
            )));
        }
        if !(0.0..1.0).contains(&self.contraction_scale) {
            return Err(Error::Argument(format!(
                "contraction scale {} outside [0, 1)",
                self.contraction_scale
            )));
        }
        Ok(())
    }

    /// Size of the complementary block.
    pub fn complement(&self) -> (usize, usize) {
        (
            self.codomain.rows - self.multiplicity * self.domain.rows,
            self.codomain.cols - self.multiplicity * self.domain.cols,
        )
    }
}

/// Gauge data and exact supports of a generated map.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub u: ComplexMatrix,
    pub v: ComplexMatrix,
    pub multiplicity: usize,
    /// The complementary block before the frame change, if present.
    pub s0: Option<MatrixMap>,
    /// Right support of the kernel of the inverse triple morphism.
    pub p: ComplexMatrix,
    /// Left support.
    pub q: ComplexMatrix,
}

/// Haar unitary: QR of a complex Gaussian matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn random_unitary_with(dim: usize, rng: &mut Rng) -> ComplexMatrix {
    let g = random_gaussian(dim, dim, rng);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i != j {
            return C64::default();
        }
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            d / real(d.norm())
        } else {
            real(1.0)
        }
    });
    q * phases
}

pub fn random_unitary(dim: usize, seed: u64) -> Result<ComplexMatrix> {
    if dim == 0 {
        return Err(Error::Argument("unitary dimension must be at least 1".into()));
    }
    Ok(random_unitary_with(dim, &mut seeded_rng(seed)))
}

fn random_contraction(rows: usize, cols: usize, rng: &mut Rng) -> ComplexMatrix {
    let g = random_gaussian(rows, cols, rng);
    let n = op_norm(&g);
    g / real(n)
}

fn leading_blocks(x: &ComplexMatrix, k: usize, tail: &ComplexMatrix) -> ComplexMatrix {
    let mut blocks: Vec<&ComplexMatrix> = std::iter::repeat_n(x, k).collect();
    blocks.push(tail);
    block_diag(&blocks)
}

/// `diag(0_k, E)` with `E` the projection onto the joint column range of
/// `images`. The range of `S0` need not fill its corner.
fn tail_support(n: usize, k: usize, images: &[ComplexMatrix]) -> ComplexMatrix {
    let rows = n - k;
    let mut joined = ComplexMatrix::zeros(rows, images.iter().map(|y| y.ncols()).sum());
    let mut at = 0;
    for y in images {
        joined.columns_mut(at, y.ncols()).copy_from(y);
        at += y.ncols();
    }
    let range = column_range(&joined, 1e-10);
    let mut out = ComplexMatrix::zeros(n, n);
    out.view_mut((k, k), (rows, rows)).copy_from(&(&range * range.adjoint()));
    out
}

/// Scaled convex combination of `x -> A_j P_j x Q_j* B_j`, with enough
/// terms that the images jointly cover the whole block.
fn random_complementary(domain: Shape, rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> MatrixMap {
    let codomain = Shape { rows, cols };
    let terms = rows.div_ceil(domain.rows).max(cols.div_ceil(domain.cols)) + 1;
    let mut weights: Vec<f64> = (0..terms).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w *= scale / total);
    let parts: Vec<(ComplexMatrix, ComplexMatrix)> = weights
        .iter()
        .map(|w| {
            let a = random_unitary_with(rows, rng);
            let b = random_unitary_with(cols, rng);
            let p = random_contraction(rows, domain.rows, rng);
            let q = random_contraction(cols, domain.cols, rng);
            (a * p * real(*w), q.adjoint() * b)
        })
        .collect();
    MatrixMap::from_fn(domain, codomain, |x| {
        let mut acc = codomain.zeros();
        for (left, right) in &parts {
            acc += left * x * right;
        }
        acc
    })
    .expect("shapes are consistent")
}

fn assemble(spec: &GenSpec, s0: Option<&MatrixMap>, u: &ComplexMatrix, v: &ComplexMatrix) -> MatrixMap {
    let (rr, ss) = spec.complement();
    let k = spec.multiplicity;
    MatrixMap::from_fn(spec.domain, spec.codomain, |x| {
        let tail = match s0 {
            Some(s) => s.apply(x).expect("domain shape"),
            None => ComplexMatrix::zeros(rr, ss),
        };
        u * leading_blocks(x, k, &tail) * v
    })
    .expect("block sizes match the codomain")
}

/// `T(x) = U diag{x, …, x, 0} V` with Haar `U`, `V`.
pub fn random_triple_morphism(spec: &GenSpec) -> Result<(MatrixMap, GroundTruth)> {
    spec.validate()?;
    if spec.multiplicity == 0 {
        return Err(Error::Argument("multiplicity must be at least 1".into()));
    }
    let mut rng = seeded_rng(spec.seed);
    let u = random_unitary_with(spec.codomain.rows, &mut rng);
    let v = random_unitary_with(spec.codomain.cols, &mut rng);
    let map = assemble(spec, None, &u, &v);
    let (r, s) = (spec.codomain.rows, spec.codomain.cols);
    Ok((
        map,
        GroundTruth {
            u,
            v,
            multiplicity: spec.multiplicity,
            s0: None,
            p: ComplexMatrix::zeros(s, s),
            q: ComplexMatrix::zeros(r, r),
        },
    ))
}

/// `T(x) = U diag{x, …, x, S0(x)} V` with `‖S0‖_cb ≤ contraction_scale`.
/// A zero scale gives a triple morphism.
pub fn random_complete_isometry(spec: &GenSpec) -> Result<(MatrixMap, GroundTruth)> {
    spec.validate()?;
    if spec.multiplicity == 0 {
        return Err(Error::Argument("multiplicity must be at least 1".into()));
    }
    let (rr, ss) = spec.complement();
    if spec.contraction_scale > 0.0 && (rr == 0 || ss == 0) {
        return Err(Error::Argument(format!(
            "no room for a complementary block: {} copies of {} fill {}",
            spec.multiplicity, spec.domain, spec.codomain
        )));
    }
    let mut rng = seeded_rng(spec.seed);
    let u = random_unitary_with(spec.codomain.rows, &mut rng);
    let v = random_unitary_with(spec.codomain.cols, &mut rng);
    let (r, s) = (spec.codomain.rows, spec.codomain.cols);
    if spec.contraction_scale == 0.0 {
        let map = assemble(spec, None, &u, &v);
        return Ok((
            map,
            GroundTruth {
                u,
                v,
                multiplicity: spec.multiplicity,
                s0: None,
                p: ComplexMatrix::zeros(s, s),
                q: ComplexMatrix::zeros(r, r),
            },
        ));
    }
    let s0 = random_complementary(spec.domain, rr, ss, spec.contraction_scale, &mut rng);
    let map = assemble(spec, Some(&s0), &u, &v);
    let k = spec.multiplicity;
    let adjoints: Vec<ComplexMatrix> = s0.action().iter().map(|y| y.adjoint()).collect();
    let p = v.adjoint() * tail_support(s, k * spec.domain.cols, &adjoints) * &v;
    let q = &u * tail_support(r, k * spec.domain.rows, s0.action()) * u.adjoint();
    Ok((
        map,
        GroundTruth {
            u,
            v,
            multiplicity: k,
            s0: Some(s0),
            p,
            q,
        },
    ))
}

/// A mixed workload spec: `m, n ≤ 3`, `r, s ≤ 8`, multiplicity up to 3,
/// and a contraction scale that is zero about 30% of the time or when the
/// copies fill the codomain. `seed` is stored for the map itself.
pub fn random_spec(rng: &mut Rng, seed: u64) -> GenSpec {
    let m = rng.random_range(1..=3);
    let n = rng.random_range(1..=3);
    let kmax = (8 / m).min(8 / n).min(3);
    let k = rng.random_range(1..=kmax);
    let r = rng.random_range(k * m..=8);
    let s = rng.random_range(k * n..=8);
    let scale = if r == k * m || s == k * n || rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(0.1..0.95)
    };
    GenSpec::new((m, n), (r, s), k, scale, seed).expect("sampled shapes fit")
}

/// A map with a recorded level-one input whose image norm is
/// `1 + margin`.
#[derive(Debug, Clone)]
pub struct Noncontraction {
    pub map: MatrixMap,
    pub witness: ComplexMatrix,
    pub level: usize,
    pub ratio: f64,
}

pub fn random_noncontraction(domain: Shape, codomain: Shape, margin: f64, seed: u64) -> Result<Noncontraction> {
    if margin <= 0.0 {
        return Err(Error::Argument("margin must be positive".into()));
    }
    let mut rng = seeded_rng(seed);
    let raw: Vec<ComplexMatrix> = (0..domain.dim())
        .map(|_| random_gaussian(codomain.rows, codomain.cols, &mut rng))
        .collect();
    let k = rng.random_range(0..domain.dim());
    let factor = (1.0 + margin) / op_norm(&raw[k]);
    let action = raw.into_iter().map(|a| a * real(factor)).collect();
    let map = MatrixMap::new(domain, codomain, action)?;
    Ok(Noncontraction {
        map,
        witness: domain.unit(k / domain.cols, k % domain.cols),
        level: 1,
        ratio: 1.0 + margin,
    })
}

/// `x -> U diag(xᵗ, 0) V` on square `M_n`, `n ≥ 2`: isometric at level one,
/// cb norm `n`, refuted at level two by the swap matrix.
pub fn random_transpose_embedding(n: usize, codomain: Shape, seed: u64) -> Result<Noncontraction> {
    if n < 2 || codomain.rows < n || codomain.cols < n {
        return Err(Error::Argument(format!("transpose of M_{n} does not fit in {codomain}")));
    }
    let domain = Shape::square(n)?;
    let mut rng = seeded_rng(seed);
    let u = random_unitary_with(codomain.rows, &mut rng);
    let v = random_unitary_with(codomain.cols, &mut rng);
    let map = MatrixMap::from_fn(domain, codomain, |x| {
        let mut y = codomain.zeros();
        y.view_mut((0, 0), (n, n)).copy_from(&x.transpose());
        &u * y * &v
    })?;
    let mut swap = ComplexMatrix::zeros(2 * n, 2 * n);
    for a in 0..2 {
        for b in 0..2 {
            swap[(a * n + b, b * n + a)] = real(1.0);
        }
    }
    Ok(Noncontraction {
        map,
        witness: swap,
        level: 2,
        ratio: 2.0,
    })
}

/// `T + delta * R / ‖R‖` for a random direction `R` (action-tensor norm).
pub fn perturb_random(map: &MatrixMap, delta: f64, seed: u64) -> Result<MatrixMap> {
    let mut rng = seeded_rng(seed);
    let c = map.codomain();
    let r: Vec<ComplexMatrix> = (0..map.domain().dim())
        .map(|_| random_gaussian(c.rows, c.cols, &mut rng))
        .collect();
    let norm = r.iter().map(|a| frobenius(a).powi(2)).sum::<f64>().sqrt();
    let dir = MatrixMap::new(map.domain(), c, r)?.scale(real(delta / norm));
    map.add(&dir)
}

/// Shrinks `T(E_11)` by `1 - delta`, pushing the map towards one that
/// loses rank.
pub fn perturb_toward_rank_deficient(map: &MatrixMap, delta: f64) -> Result<MatrixMap> {
    let mut action = map.action().to_vec();
    action[0] *= real(1.0 - delta);
    MatrixMap::new(map.domain(), map.codomain(), action)
}

/// `W1 diag(1, …, 1, 0, …) W2` with `rank` ones.
pub fn random_partial_isometry(shape: Shape, rank: usize, rng: &mut Rng) -> ComplexMatrix {
    let w1 = random_unitary_with(shape.rows, rng);
    let w2 = random_unitary_with(shape.cols, rng);
    let d = ComplexMatrix::from_fn(shape.rows, shape.cols, |i, j| {
        if i == j && i < rank {
            real(1.0)
        } else {
            C64::default()
        }
    });
    w1 * d * w2
}

/// Unital completely positive map `x -> Σ_k K_k* x K_k` on `M_n` with
/// `Σ K_k* K_k = 1`, from a random isometry `M_n -> M_{n·terms}`.
pub fn random_unital_cp(n: usize, terms: usize, rng: &mut Rng) -> MatrixMap {
    let w = random_unitary_with(n * terms, rng);
    let iso = w.columns(0, n).clone_owned();
    let kraus: Vec<ComplexMatrix> = (0..terms)
        .map(|k| iso.rows(k * n, n).clone_owned())
        .collect();
    let shape = Shape { rows: n, cols: n };
    MatrixMap::from_fn(shape, shape, |x| {
        let mut acc = shape.zeros();
        for k in &kraus {
            acc += k.adjoint() * x * k;
        }
        acc
    })
    .expect("square shapes")
}

/// `diag(x, S0(x))` frames for tests: the embedding `x -> diag(x, 0)`.
pub fn corner_embedding(domain: Shape, codomain: Shape) -> Result<MatrixMap> {
    if codomain.rows < domain.rows || codomain.cols < domain.cols {
        return Err(Error::dimension(format!("at least {domain}"), codomain));
    }
    MatrixMap::from_fn(domain, codomain, |x| {
        let mut y = codomain.zeros();
        y.view_mut((0, 0), x.shape()).copy_from(x);
        y
    })
}

/// `‖U* U - 1‖_F`.
pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    frobenius(&(u.adjoint() * u - identity(u.ncols())))
}
