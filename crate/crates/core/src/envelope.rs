//! The triple system generated by the range of a map, the inverse triple
//! morphism `ρ` with `ρ(T(a)) = a`, its kernel `N`, the supports `p`, `q`
//! of `N`, and the reduced map `θ(a) = (1-q) T(a) (1-p)`.
//!
//! Closure is built as `X + X·D` where `X = T(A)` and `D` is the algebra
//! generated by `{x_i* x_j}`. Every word tried along the way carries its
//! formal preimage on the domain side. If one linear assignment sends every
//! tried word to its preimage, `ρ` is multiplicative on `D` by induction on
//! word length and therefore a triple morphism on `Z`; otherwise the
//! offending word shows that no such morphism exists and `T` is not a
//! complete isometry.

use crate::algebra::{commutant, left_support, right_support, MatrixSubspace, Projection};
use crate::error::{Error, Result};
use crate::linmap::MatrixMap;
use crate::matrix::{
    add_scaled, c64, frobenius, hermitian_eigen, hermitian_part, inner, null_space,
    null_space_below,
    random_gaussian, rank, real, seeded_rng, trace, unvectorize, vectorize,
    ComplexMatrix, Shape,
};
use crate::report::CheckReport;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    /// Rank threshold for closure growth.
    pub tol: f64,
    /// Largest accepted relative mismatch between a word and its preimage.
    pub consistency_tol: f64,
    /// Relative singular-value threshold for the kernel of `ρ`.
    pub kernel_tol: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            tol: crate::matrix::DEFAULT_TOL,
            consistency_tol: 1e-6,
            kernel_tol: 1e-8,
        }
    }
}

impl EnvelopeOptions {
    pub fn with_tol(tol: f64) -> Self {
        EnvelopeOptions {
            tol,
            consistency_tol: tol.max(1e-6),
            kernel_tol: tol.max(1e-8),
        }
    }
}

/// Orthonormal basis of `Z` with `ρ` evaluated on each basis element.
#[derive(Debug, Clone)]
pub struct TripleWordTable {
    pub basis_z: Vec<ComplexMatrix>,
    pub preimages: Vec<ComplexMatrix>,
    /// Words generated, including those that added no new direction.
    pub words_tried: usize,
    /// Largest relative preimage mismatch over dependent words.
    pub max_residual: f64,
}

/// A word that lies in the span of earlier ones while its preimage does not.
#[derive(Debug, Clone)]
pub struct Inconsistency {
    /// The word minus its expansion in the basis so far (numerically zero).
    pub word: ComplexMatrix,
    /// The preimage defect `pre(w) - ρ(w)`, nonzero.
    pub defect: ComplexMatrix,
    pub relative_residual: f64,
    /// Which closure stage produced the word: `range`, `right algebra` or
    /// `envelope`.
    pub stage: &'static str,
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub map: MatrixMap,
    pub z: MatrixSubspace,
    pub words: TripleWordTable,
    /// `mn x dim Z`; column `k` is the row-major vectorization of `ρ(z_k)`.
    pub rho: ComplexMatrix,
    pub n: MatrixSubspace,
    pub p: Projection,
    pub q: Projection,
    pub theta: MatrixMap,
    pub consistent: bool,
}

#[derive(Debug, Clone)]
pub enum EnvelopeOutcome {
    Consistent(Box<EnvelopeResult>),
    Inconsistent(Inconsistency),
}

impl EnvelopeOutcome {
    pub fn consistent(self) -> Option<EnvelopeResult> {
        match self {
            EnvelopeOutcome::Consistent(env) => Some(*env),
            EnvelopeOutcome::Inconsistent(_) => None,
        }
    }
}

enum Insert {
    Added,
    Dependent,
    Inconsistent(Inconsistency),
}

/// Gram–Schmidt basis that carries a linear assignment to each element.
///
/// `raw` keeps the accepted words as they were formed, with preimages that
/// are exact products. Later products are taken from `raw` so rounding is
/// amplified by the orthonormalization once instead of once per round.
struct Tracked {
    stage: &'static str,
    ambient: Shape,
    basis: Vec<ComplexMatrix>,
    pre: Vec<ComplexMatrix>,
    raw: Vec<(ComplexMatrix, ComplexMatrix)>,
    tried: usize,
    max_residual: f64,
}

impl Tracked {
    fn new(stage: &'static str, ambient: Shape) -> Self {
        Tracked {
            stage,
            ambient,
            basis: Vec::new(),
            pre: Vec::new(),
            raw: Vec::new(),
            tried: 0,
            max_residual: 0.0,
        }
    }

    /// `reference` is the size the word would have without cancellation
    /// (the product of its factors' norms); thresholds are relative to it.
    fn insert(
        &mut self,
        word: &ComplexMatrix,
        pre: &ComplexMatrix,
        reference: f64,
        opts: &EnvelopeOptions,
    ) -> Insert {
        self.tried += 1;
        let mut r = word.clone();
        let mut r_pre = pre.clone();
        for _ in 0..2 {
            for (q, qp) in self.basis.iter().zip(&self.pre) {
                let c = inner(q, &r);
                add_scaled(&mut r, -c, q);
                add_scaled(&mut r_pre, -c, qp);
            }
        }
        let norm = frobenius(&r);
        let full = self.basis.len() >= self.ambient.dim();
        let scale = reference
            .max(frobenius(word))
            .max(frobenius(pre))
            .max(f64::MIN_POSITIVE);
        if !full && norm > opts.tol * scale {
            let s = real(1.0 / norm);
            self.basis.push(r * s);
            self.pre.push(r_pre * s);
            self.raw.push((word.clone(), pre.clone()));
            return Insert::Added;
        }
        let relative = frobenius(&r_pre) / scale;
        self.max_residual = self.max_residual.max(relative);
        if relative > opts.consistency_tol {
            return Insert::Inconsistent(Inconsistency {
                word: r,
                defect: r_pre,
                relative_residual: relative,
                stage: self.stage,
            });
        }
        Insert::Dependent
    }
}

macro_rules! try_insert {
    ($tracked:expr, $word:expr, $pre:expr, $reference:expr, $opts:expr) => {
        match $tracked.insert($word, $pre, $reference, $opts) {
            Insert::Inconsistent(w) => return Ok(EnvelopeOutcome::Inconsistent(w)),
            other => other,
        }
    };
}

/// Size of a product of two tracked elements before cancellation, on
/// whichever side is larger.
fn product_scale(
    (a, a_pre): (&ComplexMatrix, &ComplexMatrix),
    (b, b_pre): (&ComplexMatrix, &ComplexMatrix),
) -> f64 {
    (frobenius(a) * frobenius(b)).max(frobenius(a_pre) * frobenius(b_pre))
}

/// Unit-Frobenius kernel vector of `T`, if any.
pub fn kernel_vector(map: &MatrixMap, tol: f64) -> Option<ComplexMatrix> {
    let a = map.action_matrix();
    let kernel = null_space(&a, tol);
    if kernel.ncols() == 0 && frobenius(&a) > 0.0 {
        return None;
    }
    if frobenius(&a) == 0.0 {
        return Some(map.domain().unit(0, 0));
    }
    Some(unvectorize(map.domain(), kernel.column(0).clone_owned().as_slice()))
}

pub fn build_envelope(map: &MatrixMap, opts: &EnvelopeOptions) -> Result<EnvelopeOutcome> {
    if let Some(kernel) = kernel_vector(map, opts.tol) {
        return Err(Error::NotInjective { kernel });
    }
    let (dom, cod) = (map.domain(), map.codomain());

    let mut seed = Tracked::new("range", cod);
    let largest = map.action().iter().map(frobenius).fold(1.0, f64::max);
    for (k, image) in map.action().iter().enumerate() {
        let unit = dom.unit(k / dom.cols, k % dom.cols);
        try_insert!(seed, image, &unit, largest, opts);
    }

    let right_shape = Shape {
        rows: cod.cols,
        cols: cod.cols,
    };
    let mut algebra = Tracked::new("right algebra", right_shape);
    for (x, xa) in &seed.raw {
        for (y, ya) in &seed.raw {
            let reference = product_scale((x, xa), (y, ya));
            try_insert!(algebra, &(x.adjoint() * y), &(xa.adjoint() * ya), reference, opts);
        }
    }
    let generators = algebra.raw.clone();
    let first_products: Vec<ComplexMatrix> = generators.iter().map(|(w, _)| w.clone()).collect();
    let mut frontier = generators.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (d, da) in &frontier {
            for (g, ga) in &generators {
                let reference = product_scale((d, da), (g, ga));
                let (w, wa) = (d * g, da * ga);
                if let Insert::Added = try_insert!(algebra, &w, &wa, reference, opts) {
                    next.push((w, wa));
                }
            }
        }
        frontier = next;
    }

    let mut z = Tracked::new("envelope", cod);
    for (x, xa) in &seed.raw {
        try_insert!(z, x, xa, largest, opts);
    }
    for (x, xa) in &seed.raw {
        for (d, da) in &algebra.raw {
            let reference = product_scale((x, xa), (d, da));
            try_insert!(z, &(x * d), &(xa * da), reference, opts);
        }
    }

    let mut rho = ComplexMatrix::zeros(dom.dim(), z.basis.len());
    for (k, pre) in z.pre.iter().enumerate() {
        rho.set_column(k, &vectorize(pre));
    }
    let (z_space, n, p, q) = match refine_structure(map, &first_products, opts) {
        Some(found) => found,
        None => {
            let coeffs = null_space(&rho, opts.kernel_tol);
            let kernel_gens = (0..coeffs.ncols()).map(|c| {
                let mut n = cod.zeros();
                for (k, q) in z.basis.iter().enumerate() {
                    add_scaled(&mut n, coeffs[(k, c)], q);
                }
                n
            });
            let n = MatrixSubspace::span(cod, kernel_gens, opts.tol)?;
            let p = right_support(&n, opts.kernel_tol);
            let q = left_support(&n, opts.kernel_tol);
            let z_space = MatrixSubspace::span(cod, z.basis.iter().cloned(), opts.tol)?;
            (z_space, n, p, q)
        }
    };
    let (pc, qc) = (p.complement(), q.complement());
    let theta = MatrixMap::from_fn(dom, cod, |a| {
        qc.matrix() * map.apply(a).expect("domain shape") * pc.matrix()
    })?;

    let words = TripleWordTable {
        basis_z: z.basis,
        preimages: z.pre,
        words_tried: seed.tried + algebra.tried + z.tried,
        max_residual: seed.max_residual.max(algebra.max_residual).max(z.max_residual),
    };
    Ok(EnvelopeOutcome::Consistent(Box::new(EnvelopeResult {
        map: map.clone(),
        z: z_space,
        words,
        rho,
        n,
        p,
        q,
        theta,
        consistent: true,
    })))
}

/// `Z`, `N`, `p`, `q` recomputed from exact data once the closure has shown
/// consistency.
///
/// Word closure merges nearby spectral directions and lets rounding in as
/// spurious ones. Here `D` is recovered as `e_D D'' e_D` from the commutant
/// `C = D'` of the generators `x_i* x_j` (the bicommutant of a *-algebra
/// with unit `e_D` is `D + C(1 - e_D)`), `Z = X·D` is spanned by exact
/// images times that basis, and `N = Z p` has the left support of `X p`
/// because `p` is central in `D`.
fn refine_structure(
    map: &MatrixMap,
    generators: &[ComplexMatrix],
    opts: &EnvelopeOptions,
) -> Option<(MatrixSubspace, MatrixSubspace, Projection, Projection)> {
    let cod = map.codomain();
    let comm = commutant(generators, 1e-10).ok()?;
    let bicomm = commutant(comm.basis(), 1e-10).ok()?;
    let images = MatrixSubspace::span(cod, map.action().iter().cloned(), opts.tol).ok()?;
    let e = right_support(&images, opts.tol);
    let e = e.matrix();
    let d = MatrixSubspace::span(Shape { rows: cod.cols, cols: cod.cols }, bicomm.basis().iter().map(|b| e * b * e), 1e-10).ok()?;
    let products = map
        .action()
        .iter()
        .flat_map(|x| d.basis().iter().map(move |b| x * b));
    let z = MatrixSubspace::span(cod, products, opts.tol).ok()?;
    let p = central_kernel_support(&comm, map, generators)?;
    let kernel = z
        .basis()
        .iter()
        .map(|b| b * p.matrix())
        .filter(|x| frobenius(x) > opts.kernel_tol);
    let n = MatrixSubspace::span(cod, kernel, opts.kernel_tol).ok()?;
    let xp = map.action().iter().map(|x| x * p.matrix());
    let q = left_support(&MatrixSubspace::span(cod, xp, opts.tol).ok()?, opts.tol);
    Some((z, n, p, q))
}

/// Relative triple defect below which a summand survives `ρ`.
const SUMMAND_KEEP: f64 = 1e-7;
/// Relative triple defect above which a summand is killed by `ρ`.
const SUMMAND_KILL: f64 = 1e-4;

/// The right support of `N`, read off the centre of the right algebra `D`.
///
/// `ρ` restricts to a *-homomorphism of `D` onto `M_n`, so its kernel is the
/// sum of all but one minimal central summand and `p` is the unit of that
/// sum. The centre is taken from the commutant `C` of the generators of `D`
/// (the centre of `C` is the centre of `D` plus `C(1 - e_D)`), which avoids
/// the small, rounding-dominated directions of the closed-up basis of `D`.
/// The surviving summand `c` is the one on which `a -> T(a)c` is a triple
/// morphism: on it `T(a)T(b)*T(e) - T(ab*e)`, which lies in `N`, vanishes.
/// Distinct summands carry inequivalent copies, so no killed summand passes.
/// Returns `None` when the split cannot be confirmed.
fn central_kernel_support(comm: &MatrixSubspace, map: &MatrixMap, generators: &[ComplexMatrix]) -> Option<Projection> {
    let s = map.codomain().cols;
    let scale = generators.iter().map(frobenius).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let dom = map.domain();
    let units: Vec<ComplexMatrix> = (0..dom.rows)
        .flat_map(|i| (0..dom.cols).map(move |j| (i, j)))
        .map(|(i, j)| {
            let mut e = dom.zeros();
            e[(i, j)] = real(1.0);
            e
        })
        .collect();
    let images: Vec<ComplexMatrix> = units.iter().map(|e| map.apply(e).expect("domain shape")).collect();
    let reach = images.iter().map(frobenius).fold(0.0, f64::max);
    // Worst failure of T(a)T(b)*T(e)c = T(ab*e)c over matrix units.
    let triple_defect = |c: &ComplexMatrix| {
        let cut: Vec<ComplexMatrix> = images.iter().map(|x| x * c).collect();
        let mut worst = 0.0f64;
        for (a, ta) in units.iter().zip(&images) {
            for (b, tb) in units.iter().zip(&images) {
                let left = a * b.adjoint();
                let mid = ta * tb.adjoint();
                for (e, tec) in units.iter().zip(&cut) {
                    let target = map.apply(&(&left * e)).expect("domain shape") * c;
                    worst = worst.max(frobenius(&(&mid * tec - target)));
                }
            }
        }
        worst / reach.powi(3).max(f64::MIN_POSITIVE)
    };
    let mut rng = seeded_rng(0x5eed);
    for _ in 0..4 {
        let probes: Vec<ComplexMatrix> = (0..3).map(|_| random_element(comm, &mut rng)).collect();
        let centre = intersect_commutant(comm, &probes)?;
        if !centre
            .basis()
            .iter()
            .all(|z| comm.basis().iter().all(|c| frobenius(&(z * c - c * z)) <= 1e-8))
        {
            continue;
        }
        let h = hermitian_part(&random_element(&centre, &mut rng))
            + hermitian_part(&(random_element(&centre, &mut rng) * c64(0.0, 1.0)));
        let summands = spectral_clusters(&h, s);
        if !summands.iter().all(|c| is_minimal(c, &centre)) {
            continue;
        }

        let mut kept = 0;
        let mut killed = Vec::new();
        let mut ok = true;
        for c in summands {
            let touches = generators.iter().any(|g| frobenius(&(g * &c)) > 1e-8 * scale);
            if !touches {
                continue;
            }
            let defect = triple_defect(&c);
            if defect < SUMMAND_KEEP {
                kept += 1;
            } else if defect > SUMMAND_KILL {
                killed.push(c);
            } else {
                ok = false;
            }
        }
        if !ok || kept != 1 {
            continue;
        }
        let mut p = ComplexMatrix::zeros(s, s);
        for c in &killed {
            p += c;
        }
        return Projection::new(hermitian_part(&p)).ok();
    }
    None
}

fn random_element(space: &MatrixSubspace, rng: &mut crate::matrix::Rng) -> ComplexMatrix {
    let w = random_gaussian(space.dim(), 1, rng);
    let mut x = space.ambient().zeros();
    for (b, c) in space.basis().iter().zip(w.iter()) {
        add_scaled(&mut x, *c, b);
    }
    x
}

/// Elements of `space` commuting with every probe.
fn intersect_commutant(space: &MatrixSubspace, probes: &[ComplexMatrix]) -> Option<MatrixSubspace> {
    let s = space.ambient().rows;
    let dim = space.dim();
    let mut system = ComplexMatrix::zeros(probes.len() * s * s, dim);
    for (k, b) in space.basis().iter().enumerate() {
        for (j, g) in probes.iter().enumerate() {
            let v = vectorize(&(b * g - g * b));
            system.view_mut((j * s * s, k), (s * s, 1)).copy_from(&v);
        }
    }
    let reach = probes.iter().map(frobenius).fold(0.0, f64::max);
    let coeffs = null_space_below(&system, 1e-10 * reach.max(f64::MIN_POSITIVE));
    let gens = (0..coeffs.ncols()).map(|c| {
        let mut x = space.ambient().zeros();
        for (k, b) in space.basis().iter().enumerate() {
            add_scaled(&mut x, coeffs[(k, c)], b);
        }
        x
    });
    MatrixSubspace::span(space.ambient(), gens, 1e-10).ok()
}

/// Spectral projections of the Hermitian `h`, one per eigenvalue cluster.
fn spectral_clusters(h: &ComplexMatrix, s: usize) -> Vec<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(h);
    let top = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let gap = 1e-6 * top.max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    let mut k = 0;
    while k < s {
        let mut end = k + 1;
        while end < s && values[end] - values[end - 1] <= gap {
            end += 1;
        }
        let v = vectors.columns(k, end - k);
        out.push(v * v.adjoint());
        k = end;
    }
    out
}

/// A central projection is minimal when the centre compresses to scalars
/// under it.
fn is_minimal(c: &ComplexMatrix, centre: &MatrixSubspace) -> bool {
    let t = trace(c).re;
    centre.basis().iter().all(|z| {
        let cz = c * z;
        frobenius(&(&cz - c * (trace(&cz) / real(t)))) <= 1e-6 * frobenius(z)
    })
}

impl EnvelopeResult {
    /// `ρ(z)` for `z` in `Z`, through the recorded basis.
    pub fn rho_apply(&self, z: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.map.domain().zeros();
        for (q, pre) in self.words.basis_z.iter().zip(&self.words.preimages) {
            add_scaled(&mut out, inner(q, z), pre);
        }
        out
    }

    /// The complementary corner `a -> q T(a) p`.
    pub fn corner(&self) -> MatrixMap {
        self.map
            .compress(self.q.matrix(), self.p.matrix())
            .expect("projections match the codomain")
    }
}

/// `q z = q z p = z p` on every basis element of `Z`.
pub fn verify_moce(env: &EnvelopeResult, tol: f64) -> CheckReport {
    let (p, q) = (env.p.matrix(), env.q.matrix());
    let mut left: f64 = 0.0;
    let mut right: f64 = 0.0;
    for z in env.z.basis() {
        let qzp = q * z * p;
        left = left.max(frobenius(&(q * z - &qzp)));
        right = right.max(frobenius(&(z * p - &qzp)));
    }
    let mut report = CheckReport::new();
    report.push("qz = qzp", left, tol);
    report.push("zp = qzp", right, tol);
    report
}

/// `(1-q) T(a) = T(a) (1-p) = (1-q) T(a) (1-p)` on the domain basis.
pub fn verify_reducing(env: &EnvelopeResult, tol: f64) -> CheckReport {
    let (pc, qc) = (env.p.complement(), env.q.complement());
    let mut a_res: f64 = 0.0;
    let mut b_res: f64 = 0.0;
    for t in env.map.action() {
        let both = qc.matrix() * t * pc.matrix();
        a_res = a_res.max(frobenius(&(qc.matrix() * t - &both)));
        b_res = b_res.max(frobenius(&(t * pc.matrix() - &both)));
    }
    let mut report = CheckReport::new();
    report.push("(1-q)T(a) = (1-q)T(a)(1-p)", a_res, tol);
    report.push("T(a)(1-p) = (1-q)T(a)(1-p)", b_res, tol);
    report
}

/// `Z N* Z + N Z* Z + Z Z* N ⊆ N`.
pub fn verify_triple_ideal(env: &EnvelopeResult, tol: f64) -> CheckReport {
    let mut worst: f64 = 0.0;
    let zs = env.z.basis();
    for nb in env.n.basis() {
        for a in zs {
            for b in zs {
                worst = worst
                    .max(env.n.residual(&(a * nb.adjoint() * b)))
                    .max(env.n.residual(&(nb * a.adjoint() * b)))
                    .max(env.n.residual(&(a * b.adjoint() * nb)));
            }
        }
    }
    let mut report = CheckReport::new();
    report.push("N is a triple ideal of Z", worst, tol);
    report
}

/// `p` commutes with `T(a)* T(b)` on basis pairs.
pub fn verify_p_commutes(env: &EnvelopeResult, tol: f64) -> CheckReport {
    let p = env.p.matrix();
    let mut worst: f64 = 0.0;
    for a in env.map.action() {
        for b in env.map.action() {
            let h = a.adjoint() * b;
            worst = worst.max(frobenius(&(p * &h - &h * p)));
        }
    }
    let mut report = CheckReport::new();
    report.push("p commutes with T(A)*T(A)", worst, tol);
    report
}

/// Random-triple checks of `θ(a b* c) = θ(a) θ(b)* θ(c)` and
/// `T(a)T(b)*T(c)(1-p) = T(a b* c)(1-p)`, plus injectivity of `θ`.
pub fn verify_theta_triple(env: &EnvelopeResult, samples: usize, rng_seed: u64, tol: f64) -> CheckReport {
    let dom = env.map.domain();
    let mut rng = seeded_rng(rng_seed);
    let pc = env.p.complement();
    let t = |x: &ComplexMatrix| env.map.apply(x).expect("domain shape");
    let th = |x: &ComplexMatrix| env.theta.apply(x).expect("domain shape");
    let mut theta_res: f64 = 0.0;
    let mut t_res: f64 = 0.0;
    for _ in 0..samples {
        let [a, b, c] = [0, 1, 2].map(|_| {
            let g = random_gaussian(dom.rows, dom.cols, &mut rng);
            let n = crate::matrix::op_norm(&g);
            g / real(n)
        });
        let abc = &a * b.adjoint() * &c;
        theta_res = theta_res.max(frobenius(&(th(&abc) - th(&a) * th(&b).adjoint() * th(&c))));
        let lhs = t(&a) * t(&b).adjoint() * t(&c) * pc.matrix();
        t_res = t_res.max(frobenius(&(lhs - t(&abc) * pc.matrix())));
    }
    let mut report = CheckReport::new();
    report.push("theta(ab*c) = theta(a)theta(b)*theta(c)", theta_res, tol);
    report.push("T(a)T(b)*T(c)(1-p) = T(ab*c)(1-p)", t_res, tol);
    let r = rank(&env.theta.action_matrix(), tol.max(1e-12));
    report.push("theta is injective", (dom.dim() - r) as f64, 0.5);
    report
}

/// Largest `‖T(a)T(b)*T(c) - T(ab*c)‖` over domain matrix units.
pub fn unit_triple_residual(map: &MatrixMap) -> f64 {
    let dom = map.domain();
    let units: Vec<_> = dom.units().collect();
    let mut worst: f64 = 0.0;
    for a in &units {
        for b in &units {
            let ab = a * b.adjoint();
            if frobenius(&ab) == 0.0 {
                continue;
            }
            let tab = map.apply(a).expect("shape") * map.apply(b).expect("shape").adjoint();
            for c in &units {
                let lhs = &tab * map.apply(c).expect("shape");
                let rhs = map.apply(&(&ab * c)).expect("shape");
                worst = worst.max(frobenius(&(lhs - rhs)));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{block_diag, diag_real, op_norm};

    fn m(n: usize) -> Shape {
        Shape::square(n).unwrap()
    }

    fn env(map: &MatrixMap) -> EnvelopeResult {
        build_envelope(map, &EnvelopeOptions::default())
            .unwrap()
            .consistent()
            .expect("consistent")
    }

    fn diag_half() -> MatrixMap {
        MatrixMap::from_fn(m(2), m(4), |x| block_diag(&[x, &(x * real(0.5))])).unwrap()
    }

    #[test]
    fn identity_envelope() {
        let e = env(&MatrixMap::identity(m(2)));
        assert_eq!(e.z.dim(), 4);
        assert!(e.n.is_zero());
        assert!(e.p.is_zero() && e.q.is_zero());
        assert!(e.theta.max_action_distance(&MatrixMap::identity(m(2))) < 1e-12);
        assert!(verify_moce(&e, 1e-12).all_passed());
    }

    #[test]
    fn block_half_envelope() {
        let t = diag_half();
        let e = env(&t);
        assert_eq!(e.z.dim(), 8);
        assert_eq!(e.n.dim(), 4);
        let expected = diag_real(&[0.0, 0.0, 1.0, 1.0]);
        assert!(frobenius(&(e.p.matrix() - &expected)) < 1e-10);
        assert!(frobenius(&(e.q.matrix() - &expected)) < 1e-10);
        let theta = MatrixMap::from_fn(m(2), m(4), |x| block_diag(&[x, &m(2).zeros()])).unwrap();
        assert!(e.theta.max_action_distance(&theta) < 1e-10);
        assert!(verify_moce(&e, 1e-10).all_passed());
        assert!(verify_reducing(&e, 1e-10).all_passed());
        assert!(verify_triple_ideal(&e, 1e-10).all_passed());
        assert!(verify_p_commutes(&e, 1e-10).all_passed());
        let report = verify_theta_triple(&e, 20, 3, 1e-10);
        assert!(report.all_passed(), "{report:?}");
        // The unreduced map fails the triple identity on (E11, E11, E11).
        let e11 = m(2).unit(0, 0);
        let te = t.apply(&e11).unwrap();
        let gap = frobenius(&(&te * te.adjoint() * &te - t.apply(&e11).unwrap()));
        assert!(gap > 0.3);
    }

    #[test]
    fn scalar_envelope() {
        let one = m(1);
        let t = MatrixMap::new(one, m(2), vec![diag_real(&[1.0, 0.5])]).unwrap();
        let e = env(&t);
        assert!(frobenius(&(e.p.matrix() - m(2).unit(1, 1))) < 1e-10);
        assert!(frobenius(&(e.q.matrix() - m(2).unit(1, 1))) < 1e-10);
        assert!(frobenius(&(&e.theta.action()[0] - m(2).unit(0, 0))) < 1e-10);
    }

    #[test]
    fn half_scaling_is_inconsistent() {
        let half = MatrixMap::identity(m(2)).scale(real(0.5));
        let out = build_envelope(&half, &EnvelopeOptions::default()).unwrap();
        assert!(matches!(out, EnvelopeOutcome::Inconsistent(_)));
    }

    #[test]
    fn transpose_is_inconsistent() {
        let out = build_envelope(&MatrixMap::transpose(m(2)), &EnvelopeOptions::default()).unwrap();
        assert!(matches!(out, EnvelopeOutcome::Inconsistent(_)));
    }

    #[test]
    fn non_injective_is_refused() {
        let t = MatrixMap::from_fn(m(2), m(2), |x| {
            let mut y = x.clone();
            y[(0, 1)] = real(0.0);
            y
        })
        .unwrap();
        match build_envelope(&t, &EnvelopeOptions::default()) {
            Err(Error::NotInjective { kernel }) => {
                assert!(op_norm(&t.apply(&kernel).unwrap()) < 1e-12);
                assert!((frobenius(&kernel) - 1.0).abs() < 1e-12);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn rho_inverts_t() {
        let e = env(&diag_half());
        for (k, a) in m(2).units().enumerate() {
            let back = e.rho_apply(&e.map.action()[k]);
            assert!(frobenius(&(back - a)) < 1e-10);
        }
    }
}
