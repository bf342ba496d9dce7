//! Norms, complete positivity and complete contractivity.
//!
//! Contractivity is decided from two sides: a norm search over amplified
//! inputs can refute it with an explicit witness, and a semidefinite
//! feasibility problem on the off-diagonal block matrix can certify it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmap::{AmplifiedMap, MatrixMap};
use crate::matrix::{
    frobenius, hermitian_eigen, hermitian_part, identity, polar_isometry, random_gaussian, real,
    seeded_rng, top_singular, ComplexMatrix, Shape, C64,
};

pub use crate::matrix::op_norm;

/// Block matrix whose `(i, j)` block is `T(E_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    domain: Shape,
    codomain: Shape,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn of(map: &MatrixMap) -> Self {
        let (d, c) = (map.domain(), map.codomain());
        let mut matrix = ComplexMatrix::zeros(d.rows * c.rows, d.cols * c.cols);
        for i in 0..d.rows {
            for j in 0..d.cols {
                matrix
                    .view_mut((i * c.rows, j * c.cols), (c.rows, c.cols))
                    .copy_from(map.image_of_unit(i, j));
            }
        }
        ChoiMatrix {
            domain: d,
            codomain: c,
            matrix,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn block(&self, i: usize, j: usize) -> ComplexMatrix {
        let c = self.codomain;
        self.matrix
            .view((i * c.rows, j * c.cols), (c.rows, c.cols))
            .clone_owned()
    }

    pub fn to_map(&self) -> MatrixMap {
        let d = self.domain;
        let action = (0..d.dim()).map(|k| self.block(k / d.cols, k % d.cols)).collect();
        MatrixMap::new(self.domain, self.codomain, action).expect("blocks have codomain shape")
    }
}

pub fn choi(map: &MatrixMap) -> ChoiMatrix {
    ChoiMatrix::of(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub lower: f64,
    /// `f64::INFINITY` when no bound is known.
    pub upper: f64,
    pub witness: Option<ComplexMatrix>,
}

/// Upper bound `Σ ‖T(E_ij)‖` on the cb norm.
pub fn cb_upper_bound(map: &MatrixMap) -> f64 {
    map.action().iter().map(op_norm).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `‖T_k(X)‖ > ‖X‖`: the map is not completely contractive.
    Expansion,
    /// `‖T_k(X)‖ < ‖X‖`: the map is not completely isometric.
    Contraction,
}

/// Unit-norm input `x` at amplification `level` with `‖T_level(x)‖ = ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct FalsifierWitness {
    pub kind: ViolationKind,
    pub level: usize,
    pub x: ComplexMatrix,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct FalsifierReport {
    pub level: usize,
    pub max_ratio: f64,
    pub max_witness: ComplexMatrix,
    pub min_ratio: f64,
    pub min_witness: ComplexMatrix,
    pub upper_bound: f64,
    pub violation: Option<FalsifierWitness>,
}

impl FalsifierReport {
    pub fn expansion_estimate(&self) -> NormEstimate {
        NormEstimate {
            lower: self.max_ratio,
            upper: self.upper_bound.max(self.max_ratio),
            witness: Some(self.max_witness.clone()),
        }
    }

    pub fn expansion(&self) -> Option<&FalsifierWitness> {
        self.violation
            .as_ref()
            .filter(|w| w.kind == ViolationKind::Expansion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalsifierOptions {
    /// Random starts per level, on top of the structured ones.
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    /// Run the descent that looks for `‖T_k(X)‖ < ‖X‖`.
    pub shrink: bool,
}

impl Default for FalsifierOptions {
    fn default() -> Self {
        FalsifierOptions {
            trials: 4,
            seed: 0,
            tol: crate::matrix::DEFAULT_TOL,
            max_iters: 60,
            shrink: true,
        }
    }
}

struct Search<'a> {
    amp: AmplifiedMap<'a>,
}

impl Search<'_> {
    fn ratio(&self, x: &ComplexMatrix) -> f64 {
        let nx = op_norm(x);
        if nx <= f64::MIN_POSITIVE {
            return 0.0;
        }
        op_norm(&self.amp.apply(x).expect("shape")) / nx
    }

    /// Polar power ascent: `X <- polar(T^†(ξ η*))` never decreases `‖T(X)‖`
    /// over the unit ball.
    fn ascend(&self, start: &ComplexMatrix, max_iters: usize) -> (f64, ComplexMatrix) {
        let mut x = start / real(op_norm(start).max(f64::MIN_POSITIVE));
        let mut value = op_norm(&self.amp.apply(&x).expect("shape"));
        for _ in 0..max_iters {
            let y = self.amp.apply(&x).expect("shape");
            let (sigma, u, v) = top_singular(&y);
            if sigma <= f64::MIN_POSITIVE {
                break;
            }
            let g = self.amp.apply_hs_adjoint(&(&u * v.adjoint())).expect("shape");
            if frobenius(&g) <= f64::MIN_POSITIVE {
                break;
            }
            let next = polar_isometry(&g);
            let next_value = op_norm(&self.amp.apply(&next).expect("shape"));
            if next_value <= value + 1e-14 * value.max(1.0) {
                if next_value > value {
                    x = next;
                    value = next_value;
                }
                break;
            }
            x = next;
            value = next_value;
        }
        (value, x)
    }

    /// Normalized subgradient descent on `‖T(X)‖ / ‖X‖` with backtracking.
    fn descend(&self, start: &ComplexMatrix, max_iters: usize) -> (f64, ComplexMatrix) {
        let mut x = start / real(op_norm(start).max(f64::MIN_POSITIVE));
        let mut value = self.ratio(&x);
        let mut step = 0.5;
        for _ in 0..max_iters {
            let y = self.amp.apply(&x).expect("shape");
            let (sy, uy, vy) = top_singular(&y);
            let (sx, ux, vx) = top_singular(&x);
            let grad = self.amp.apply_hs_adjoint(&(&uy * vy.adjoint())).expect("shape") * real(sx)
                - (&ux * vx.adjoint()) * real(sy);
            let gn = frobenius(&grad);
            if gn <= 1e-15 {
                break;
            }
            let direction = grad / real(gn);
            let mut improved = false;
            while step > 1e-10 {
                let trial = &x - &direction * real(step);
                let tv = self.ratio(&trial);
                if tv < value - 1e-15 {
                    x = &trial / real(op_norm(&trial));
                    value = tv;
                    improved = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (value, x)
    }
}

fn swap_start(map: &MatrixMap, level: usize) -> Option<ComplexMatrix> {
    let d = map.domain();
    let k = level.min(d.rows).min(d.cols);
    if level < 2 || k < 2 {
        return None;
    }
    let mut x = ComplexMatrix::zeros(level * d.rows, level * d.cols);
    for a in 0..k {
        for b in 0..k {
            x[(a * d.rows + b, b * d.cols + a)] = real(1.0);
        }
    }
    Some(x)
}

/// Direction minimizing `‖T(X)‖_F / ‖X‖_F` at level one.
fn smallest_gain_start(map: &MatrixMap) -> ComplexMatrix {
    let a = map.action_matrix();
    let gram = a.adjoint() * &a;
    let (_, vectors) = hermitian_eigen(&gram);
    let v = vectors.column(0);
    crate::matrix::unvectorize(map.domain(), v.clone_owned().as_slice())
}

/// Searches `id_level ⊗ T` for inputs whose norm changes. Never certifies
/// isometry: an empty `violation` only means none was found.
pub fn amplified_isometry_falsifier(
    map: &MatrixMap,
    level: usize,
    trials: usize,
    rng_seed: u64,
    tol: f64,
) -> Result<FalsifierReport> {
    let options = FalsifierOptions {
        trials,
        seed: rng_seed,
        tol,
        ..FalsifierOptions::default()
    };
    falsify_at(map, level, &options, None)
}

/// One level of the search; `warm` (an input at a lower level, embedded in
/// the top-left corner) makes estimates monotone across levels.
pub fn falsify_at(
    map: &MatrixMap,
    level: usize,
    options: &FalsifierOptions,
    warm: Option<&[&ComplexMatrix]>,
) -> Result<FalsifierReport> {
    let amp = AmplifiedMap::new(map, level)?;
    let shape = amp.domain();
    let search = Search { amp };
    let mut rng = seeded_rng(options.seed ^ (level as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));

    let mut starts: Vec<ComplexMatrix> = Vec::new();
    for w in warm.unwrap_or(&[]) {
        let mut x = shape.zeros();
        x.view_mut((0, 0), w.shape()).copy_from(w);
        starts.push(x);
    }
    if level == 1 {
        starts.extend(shape.units());
        starts.push(smallest_gain_start(map));
    } else {
        if let Some(x) = swap_start(map, level) {
            starts.push(x);
        }
        let mut diag_units = shape.zeros();
        for b in 0..level {
            diag_units[(b * map.domain().rows, b * map.domain().cols)] = real(1.0);
        }
        starts.push(diag_units);
    }
    for _ in 0..options.trials {
        starts.push(random_gaussian(shape.rows, shape.cols, &mut rng));
    }

    let mut best_max = (f64::NEG_INFINITY, shape.zeros());
    let mut start_ratios = Vec::with_capacity(starts.len());
    for s in &starts {
        if frobenius(s) <= f64::MIN_POSITIVE {
            continue;
        }
        let (v, x) = search.ascend(s, options.max_iters);
        if v > best_max.0 {
            best_max = (v, x);
        }
        start_ratios.push((search.ratio(s), s));
        if best_max.0 > 1.0 + options.tol && level > 1 {
            break;
        }
    }

    let mut best_min = (f64::INFINITY, shape.zeros());
    start_ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (v, s) in &start_ratios {
        if *v < best_min.0 {
            best_min = (*v, (*s).clone() / real(op_norm(s)));
        }
    }
    if options.shrink && best_min.0 >= 1.0 - options.tol {
        for (_, s) in start_ratios.iter().take(3) {
            let (v, x) = search.descend(s, options.max_iters);
            if v < best_min.0 {
                best_min = (v, x);
            }
            if best_min.0 < 1.0 - options.tol {
                break;
            }
        }
    }

    let violation = if best_max.0 > 1.0 + options.tol {
        Some(FalsifierWitness {
            kind: ViolationKind::Expansion,
            level,
            x: best_max.1.clone(),
            ratio: best_max.0,
        })
    } else if best_min.0 < 1.0 - options.tol {
        Some(FalsifierWitness {
            kind: ViolationKind::Contraction,
            level,
            x: best_min.1.clone(),
            ratio: best_min.0,
        })
    } else {
        None
    };
    Ok(FalsifierReport {
        level,
        max_ratio: best_max.0,
        max_witness: best_max.1,
        min_ratio: best_min.0,
        min_witness: best_min.1,
        upper_bound: cb_upper_bound(map),
        violation,
    })
}

/// Runs levels `1..=max_level`, warm-starting each level from the previous
/// maxima. Stops after the first expansion when `stop_on_expansion`.
pub fn falsify_levels(
    map: &MatrixMap,
    max_level: usize,
    options: &FalsifierOptions,
    stop_on_expansion: bool,
) -> Result<Vec<FalsifierReport>> {
    if max_level == 0 {
        return Err(Error::Argument("level must be at least 1".into()));
    }
    let mut reports: Vec<FalsifierReport> = Vec::with_capacity(max_level);
    for level in 1..=max_level {
        let warm: Vec<&ComplexMatrix> = reports
            .last()
            .map(|r| vec![&r.max_witness, &r.min_witness])
            .unwrap_or_default();
        let report = falsify_at(map, level, options, Some(&warm))?;
        let stop = stop_on_expansion && report.expansion().is_some();
        reports.push(report);
        if stop {
            break;
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpReport {
    pub positive: bool,
    pub min_eigenvalue: f64,
}

/// Complete positivity through the Choi matrix.
pub fn is_completely_positive(map: &MatrixMap, tol: f64) -> Result<CpReport> {
    let (d, c) = (map.domain(), map.codomain());
    if !d.is_square() || !c.is_square() {
        return Err(Error::dimension(
            "square domain and codomain",
            format!("{d} -> {c}"),
        ));
    }
    let m = ChoiMatrix::of(map).matrix;
    let asym = frobenius(&(&m - m.adjoint()));
    let (values, _) = hermitian_eigen(&m);
    let min_eigenvalue = values.first().copied().unwrap_or(0.0);
    let scale = frobenius(&m).max(1.0);
    Ok(CpReport {
        positive: asym <= tol * scale && min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityOptions {
    pub max_iters: usize,
    /// Accept once the smallest eigenvalue of the affine iterate is at least
    /// `-residual`.
    pub residual: f64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions {
            max_iters: 5000,
            residual: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityMethod {
    /// `[[|K*|, K], [K*, |K|]]` after balancing, no iteration needed.
    Polar,
    Dykstra,
}

/// Choi matrices `c1`, `c2` of the diagonal maps of a completely positive
/// block map `[[Φ1, T], [T^†, Φ2]]` with `Φ1(1) = 1`, `Φ2(1) = 1` up to
/// `lambda_min`. Together they bound `‖T‖_cb` by `cb_bound`.
#[derive(Debug, Clone)]
pub struct FeasibilityCertificate {
    pub method: FeasibilityMethod,
    pub c1: ComplexMatrix,
    pub c2: ComplexMatrix,
    pub lambda_min: f64,
    pub cb_bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum FeasibilityOutcome {
    Feasible(FeasibilityCertificate),
    Exhausted { lambda_min: f64, iterations: usize },
}

struct BlockProblem {
    m: usize,
    n: usize,
    r: usize,
    s: usize,
    k: ComplexMatrix,
}

impl BlockProblem {
    fn new(map: &MatrixMap) -> Self {
        let (d, c) = (map.domain(), map.codomain());
        BlockProblem {
            m: d.rows,
            n: d.cols,
            r: c.rows,
            s: c.cols,
            k: ChoiMatrix::of(map).matrix,
        }
    }

    fn top(&self) -> usize {
        self.m * self.r
    }

    fn dim(&self) -> usize {
        self.m * self.r + self.n * self.s
    }

    fn assemble(&self, c1: &ComplexMatrix, c2: &ComplexMatrix) -> ComplexMatrix {
        let t = self.top();
        let mut x = ComplexMatrix::zeros(self.dim(), self.dim());
        x.view_mut((0, 0), (t, t)).copy_from(c1);
        x.view_mut((t, t), c2.shape()).copy_from(c2);
        x.view_mut((0, t), self.k.shape()).copy_from(&self.k);
        x.view_mut((t, 0), (self.k.ncols(), self.k.nrows()))
            .copy_from(&self.k.adjoint());
        x
    }

    fn corners(&self, x: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
        let t = self.top();
        let b = self.n * self.s;
        (
            x.view((0, 0), (t, t)).clone_owned(),
            x.view((t, t), (b, b)).clone_owned(),
        )
    }

    /// Sum of the diagonal `size`-blocks of `c` (the image of the unit).
    fn unit_image(c: &ComplexMatrix, count: usize, size: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(size, size);
        for a in 0..count {
            acc += c.view((a * size, a * size), (size, size));
        }
        acc
    }

    fn fix_units(c: &mut ComplexMatrix, count: usize, size: usize) {
        let excess = (Self::unit_image(c, count, size) - identity(size)) / real(count as f64);
        for a in 0..count {
            let mut block = c.view_mut((a * size, a * size), (size, size));
            block -= &excess;
        }
    }

    fn project_affine(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let h = hermitian_part(x);
        let (mut c1, mut c2) = self.corners(&h);
        Self::fix_units(&mut c1, self.m, self.r);
        Self::fix_units(&mut c2, self.n, self.s);
        self.assemble(&c1, &c2)
    }

    fn bound_from_lambda(&self, lambda_min: f64) -> f64 {
        let delta = (-lambda_min).max(0.0);
        ((1.0 + self.m as f64 * delta) * (1.0 + self.n as f64 * delta)).sqrt()
    }
}

fn project_psd(x: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen(x);
    let n = x.nrows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > 0.0 {
            let v = vectors.column(k);
            out += (v * v.adjoint()) * real(lambda);
        }
    }
    hermitian_part(&out)
}

fn psd_sqrt(h: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let n = h.nrows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > 0.0 {
            let v = vectors.column(k);
            out += (v * v.adjoint()) * real(lambda.sqrt());
        }
    }
    out
}

/// Semidefinite certificate for `‖T‖_cb ≤ 1`, found either in closed form
/// or by Dykstra's alternating projections between the PSD cone and the
/// affine set of block matrices with the prescribed off-diagonal part and
/// unit images.
pub fn cb_feasibility(map: &MatrixMap, options: &FeasibilityOptions) -> FeasibilityOutcome {
    let problem = BlockProblem::new(map);
    let (m, n, r, s) = (problem.m, problem.n, problem.r, problem.s);

    let left = psd_sqrt(&(&problem.k * problem.k.adjoint()));
    let right = psd_sqrt(&(problem.k.adjoint() * &problem.k));
    let a = crate::matrix::op_norm(&BlockProblem::unit_image(&left, m, r));
    let b = crate::matrix::op_norm(&BlockProblem::unit_image(&right, n, s));
    let (mut c1, mut c2) = if a > f64::MIN_POSITIVE && b > f64::MIN_POSITIVE {
        let t = (b / a).sqrt();
        (left * real(t), right * real(1.0 / t))
    } else {
        (ComplexMatrix::zeros(m * r, m * r), ComplexMatrix::zeros(n * s, n * s))
    };
    let polar_bound = (a * b).sqrt();
    if polar_bound <= 1.0 + options.residual {
        // Pad the unit images up to the identity with a positive diagonal block.
        for (c, count, size) in [(&mut c1, m, r), (&mut c2, n, s)] {
            let slack = identity(size) - BlockProblem::unit_image(c, count, size);
            let mut block = c.view_mut((0, 0), (size, size));
            block += slack;
        }
        let x = problem.assemble(&c1, &c2);
        let lambda_min = hermitian_eigen(&x).0.first().copied().unwrap_or(0.0);
        return FeasibilityOutcome::Feasible(FeasibilityCertificate {
            method: FeasibilityMethod::Polar,
            c1,
            c2,
            lambda_min,
            cb_bound: polar_bound.max(problem.bound_from_lambda(lambda_min)),
            iterations: 0,
        });
    }

    let dim = problem.dim();
    let mut x = problem.project_affine(&problem.assemble(&c1, &c2));
    let mut p = ComplexMatrix::zeros(dim, dim);
    let mut q = ComplexMatrix::zeros(dim, dim);
    let mut lambda_min = f64::NEG_INFINITY;
    for iter in 0..options.max_iters {
        if iter % 10 == 0 {
            lambda_min = hermitian_eigen(&x).0.first().copied().unwrap_or(0.0);
            if lambda_min >= -options.residual {
                let (c1, c2) = problem.corners(&x);
                return FeasibilityOutcome::Feasible(FeasibilityCertificate {
                    method: FeasibilityMethod::Dykstra,
                    c1,
                    c2,
                    lambda_min,
                    cb_bound: problem.bound_from_lambda(lambda_min),
                    iterations: iter,
                });
            }
        }
        let y = project_psd(&(&x + &p));
        p = &x + &p - &y;
        let next = problem.project_affine(&(&y + &q));
        q = &y + &q - &next;
        x = next;
    }
    FeasibilityOutcome::Exhausted {
        lambda_min,
        iterations: options.max_iters,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcVerdict {
    CertifiedYes,
    CertifiedNo,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcOptions {
    pub tol: f64,
    /// Falsification level; `None` means `min(r, s)`.
    pub level: Option<usize>,
    pub falsifier: FalsifierOptions,
    pub feasibility: FeasibilityOptions,
}

impl Default for CcOptions {
    fn default() -> Self {
        CcOptions {
            tol: crate::matrix::DEFAULT_TOL,
            level: None,
            falsifier: FalsifierOptions {
                shrink: false,
                ..FalsifierOptions::default()
            },
            feasibility: FeasibilityOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CcReport {
    pub verdict: CcVerdict,
    pub witness: Option<FalsifierWitness>,
    pub certificate: Option<FeasibilityCertificate>,
    /// Largest `‖T_k(X)‖ / ‖X‖` seen by the search.
    pub max_ratio: f64,
    /// Smallest eigenvalue reached when the solver ran out of iterations.
    pub lambda_min: Option<f64>,
}

pub fn is_completely_contractive(map: &MatrixMap, options: &CcOptions) -> Result<CcReport> {
    let c = map.codomain();
    let level = options.level.unwrap_or(c.rows.min(c.cols));
    let falsifier = FalsifierOptions {
        tol: options.tol,
        ..options.falsifier
    };
    let reports = falsify_levels(map, level, &falsifier, true)?;
    let max_ratio = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    if let Some(w) = reports.iter().find_map(|r| r.expansion().cloned()) {
        return Ok(CcReport {
            verdict: CcVerdict::CertifiedNo,
            witness: Some(w),
            certificate: None,
            max_ratio,
            lambda_min: None,
        });
    }
    Ok(match cb_feasibility(map, &options.feasibility) {
        FeasibilityOutcome::Feasible(cert) => CcReport {
            verdict: CcVerdict::CertifiedYes,
            witness: None,
            certificate: Some(cert),
            max_ratio,
            lambda_min: None,
        },
        FeasibilityOutcome::Exhausted { lambda_min, .. } => CcReport {
            verdict: CcVerdict::Undecided,
            witness: None,
            certificate: None,
            max_ratio,
            lambda_min: Some(lambda_min),
        },
    })
}

/// Maps `x -> Σ_k w_k U_k x V_k` with `Σ|w_k| ≤ 1` and `U_k`, `V_k`
/// unitary are completely contractive; used by tests as a positive family.
pub fn unitary_mixture(
    domain: Shape,
    weights: &[C64],
    lefts: &[ComplexMatrix],
    rights: &[ComplexMatrix],
) -> Result<MatrixMap> {
    let mut total = MatrixMap::zero(domain, domain);
    for ((w, u), v) in weights.iter().zip(lefts).zip(rights) {
        total = total.add(&MatrixMap::sandwich(domain, u, v)?.scale(*w))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{diag_real, from_real_rows};

    fn m2() -> Shape {
        Shape::square(2).unwrap()
    }

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&identity(3)) - 1.0).abs() < 1e-14);
        assert!((op_norm(&diag_real(&[2.0, 1.0])) - 2.0).abs() < 1e-14);
        assert!((op_norm(&from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]])) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn choi_blocks_reconstruct() {
        let t = MatrixMap::transpose(Shape::new(2, 3).unwrap());
        let c = ChoiMatrix::of(&t);
        assert_eq!(c.block(1, 2), t.apply(&Shape::new(2, 3).unwrap().unit(1, 2)).unwrap());
        assert_eq!(c.to_map(), t);
    }

    #[test]
    fn falsifier_identity_finds_nothing() {
        let id = MatrixMap::identity(m2());
        for level in 1..=3 {
            let r = amplified_isometry_falsifier(&id, level, 3, 7, 1e-9).unwrap();
            assert!(r.violation.is_none(), "level {level}: {:?}", r.violation);
            assert!((r.max_ratio - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn falsifier_half_scaling_at_level_one() {
        let half = MatrixMap::identity(m2()).scale(real(0.5));
        let r = amplified_isometry_falsifier(&half, 1, 2, 1, 1e-9).unwrap();
        let w = r.violation.expect("contraction witness");
        assert_eq!(w.kind, ViolationKind::Contraction);
        assert!((w.ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn falsifier_transpose_at_level_two() {
        let t = MatrixMap::transpose(m2());
        let r = amplified_isometry_falsifier(&t, 2, 2, 3, 1e-9).unwrap();
        let w = r.expansion().expect("expansion witness");
        assert!(w.ratio >= 2.0 - 1e-6);
        assert!(r.upper_bound >= w.ratio);
    }

    #[test]
    fn levels_are_monotone() {
        let t = MatrixMap::transpose(Shape::square(3).unwrap());
        let reports = falsify_levels(&t, 3, &FalsifierOptions::default(), false).unwrap();
        for pair in reports.windows(2) {
            assert!(pair[1].max_ratio >= pair[0].max_ratio - 1e-12);
        }
    }

    #[test]
    fn cp_examples() {
        let id = is_completely_positive(&MatrixMap::identity(m2()), 1e-9).unwrap();
        assert!(id.positive);
        assert!(id.min_eigenvalue.abs() < 1e-12);

        let t = is_completely_positive(&MatrixMap::transpose(m2()), 1e-9).unwrap();
        assert!(!t.positive);
        assert!((t.min_eigenvalue + 1.0).abs() < 1e-12);

        let stack = MatrixMap::from_fn(m2(), Shape::square(4).unwrap(), |x| {
            crate::matrix::block_diag(&[x, x])
        })
        .unwrap();
        assert!(is_completely_positive(&stack, 1e-9).unwrap().positive);

        assert!(is_completely_positive(&MatrixMap::identity(Shape::new(1, 2).unwrap()), 1e-9).is_err());
    }

    #[test]
    fn cc_examples() {
        let id = is_completely_contractive(&MatrixMap::identity(m2()), &CcOptions::default()).unwrap();
        assert_eq!(id.verdict, CcVerdict::CertifiedYes);
        let cert = id.certificate.unwrap();
        assert!((cert.cb_bound - 1.0).abs() < 1e-9);
        // Both diagonal maps come out as the identity.
        let choi_id = ChoiMatrix::of(&MatrixMap::identity(m2())).matrix;
        assert!(frobenius(&(cert.c1 - &choi_id)) < 1e-9);
        assert!(frobenius(&(cert.c2 - &choi_id)) < 1e-9);

        let two = MatrixMap::identity(m2()).scale(real(2.0));
        let r = is_completely_contractive(&two, &CcOptions::default()).unwrap();
        assert_eq!(r.verdict, CcVerdict::CertifiedNo);
        let w = r.witness.unwrap();
        assert_eq!(w.level, 1);
        assert!((w.ratio - 2.0).abs() < 1e-9);

        let t = is_completely_contractive(&MatrixMap::transpose(m2()), &CcOptions::default()).unwrap();
        assert_eq!(t.verdict, CcVerdict::CertifiedNo);
        assert_eq!(t.witness.unwrap().level, 2);
    }

    #[test]
    fn dykstra_certifies_a_strict_mixture() {
        let mut rng = seeded_rng(11);
        let us: Vec<_> = (0..3)
            .map(|_| polar_isometry(&random_gaussian(2, 2, &mut rng)))
            .collect();
        let vs: Vec<_> = (0..3)
            .map(|_| polar_isometry(&random_gaussian(2, 2, &mut rng)))
            .collect();
        let w = [real(0.3), C64::new(0.0, 0.3), real(-0.3)];
        let map = unitary_mixture(m2(), &w, &us, &vs).unwrap();
        match cb_feasibility(&map, &FeasibilityOptions::default()) {
            FeasibilityOutcome::Feasible(cert) => assert!(cert.cb_bound <= 1.0 + 1e-6),
            other => panic!("expected a certificate, got {other:?}"),
        }
    }

    #[test]
    fn feasibility_fails_for_transpose() {
        let opts = FeasibilityOptions {
            max_iters: 300,
            residual: 1e-7,
        };
        assert!(matches!(
            cb_feasibility(&MatrixMap::transpose(m2()), &opts),
            FeasibilityOutcome::Exhausted { .. }
        ));
    }
}
