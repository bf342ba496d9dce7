//! Verdicts and certificates for complete isometries.
//!
//! A map is certified when its envelope is consistent, the reduced map `θ`
//! is an injective triple morphism, and the complementary corner
//! `a -> q T(a) p` is completely contractive. Then `T = θ ⊕ S` in the
//! frames of `1-q`, `q` and `1-p`, `p`, so every amplification satisfies
//! `‖T_k(x)‖ = max(‖x‖, ‖S_k(x)‖) = ‖x‖`.

use serde::{Deserialize, Serialize};

use crate::algebra::{quotient_compression, MatrixSubspace, Projection};
use crate::cbnorm::{
    cb_feasibility, falsify_at, falsify_levels, is_completely_positive, FalsifierOptions,
    FalsifierReport, FalsifierWitness, FeasibilityCertificate, FeasibilityOptions,
    FeasibilityOutcome,
};
use crate::envelope::{
    build_envelope, unit_triple_residual, verify_moce, verify_reducing, verify_theta_triple,
    EnvelopeOptions, EnvelopeOutcome, EnvelopeResult, Inconsistency,
};
use crate::error::{Error, Result};
use crate::linmap::MatrixMap;
use crate::matrix::{
    frobenius, identity, op_norm, orthonormal_complement, partial_isometry_residual,
    polar_isometry, range_basis, rank, real, top_singular, ComplexMatrix, Shape, C64,
};
use crate::report::CheckReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CompleteIsometry,
    NotCompleteIsometry,
    Undecided,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::CompleteIsometry => 0,
            Verdict::NotCompleteIsometry => 1,
            Verdict::Undecided => 2,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::CompleteIsometry => "complete_isometry",
            Verdict::NotCompleteIsometry => "not_complete_isometry",
            Verdict::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub tol: f64,
    /// Tolerance for the identity checks on a consistent envelope.
    pub check_tol: f64,
    pub seed: u64,
    /// Falsification level; `None` means `min(r, s)`.
    pub level: Option<usize>,
    pub samples: usize,
    pub falsifier: FalsifierOptions,
    pub feasibility: FeasibilityOptions,
    pub envelope: EnvelopeOptions,
    pub canonical: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions::with_tol(crate::matrix::DEFAULT_TOL)
    }
}

impl AnalyzeOptions {
    pub fn with_tol(tol: f64) -> Self {
        AnalyzeOptions {
            tol,
            check_tol: tol.max(1e-8),
            seed: 0,
            level: None,
            samples: 50,
            falsifier: FalsifierOptions {
                trials: 2,
                seed: 0,
                tol: tol.max(1e-9),
                max_iters: 40,
                shrink: false,
            },
            feasibility: FeasibilityOptions::default(),
            envelope: EnvelopeOptions::with_tol(tol),
            canonical: true,
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.falsifier.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub enum Witness {
    /// An input whose norm changes under some amplification.
    Norm(FalsifierWitness),
    /// A nonzero input sent to zero.
    Kernel(ComplexMatrix),
    /// A triple word whose preimage contradicts the linear span.
    Envelope(Inconsistency),
}

/// `θ = u π(·)` (right side, `m ≤ n`) or `θ = π(·) u` (left side, `m > n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSide {
    Right,
    Left,
}

#[derive(Debug, Clone)]
pub struct Factorization {
    pub u: ComplexMatrix,
    pub pi: MatrixMap,
    pub side: FactorSide,
    pub checks: CheckReport,
}

#[derive(Debug, Clone)]
pub struct CanonicalForm {
    /// `r x r` unitary applied on the left.
    pub u: ComplexMatrix,
    /// `s x s` unitary applied on the right.
    pub v: ComplexMatrix,
    pub multiplicity: usize,
    /// `M_{m,n} -> M_{r-m, s-n}`; absent when that block is empty.
    pub s: Option<MatrixMap>,
    /// Largest `‖U T(E) V - diag(E, S(E))‖_F` over matrix units.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub verdict: Verdict,
    pub env: Option<EnvelopeResult>,
    pub u: Option<ComplexMatrix>,
    pub pi: Option<MatrixMap>,
    pub factor_side: Option<FactorSide>,
    /// Complementary corner `a -> Q* T(a) P` on the ranges of `q`, `p`.
    pub corner: Option<MatrixMap>,
    pub canonical: Option<CanonicalForm>,
    pub cc_certificate: Option<FeasibilityCertificate>,
    pub witnesses: Vec<Witness>,
    pub checks: CheckReport,
    /// Largest `‖T_k(X)‖ / ‖X‖` found per level.
    pub level_ratios: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl Decomposition {
    fn new(verdict: Verdict) -> Self {
        Decomposition {
            verdict,
            env: None,
            u: None,
            pi: None,
            factor_side: None,
            corner: None,
            canonical: None,
            cc_certificate: None,
            witnesses: Vec::new(),
            checks: CheckReport::new(),
            level_ratios: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn p(&self) -> Option<&Projection> {
        self.env.as_ref().map(|e| &e.p)
    }

    pub fn q(&self) -> Option<&Projection> {
        self.env.as_ref().map(|e| &e.q)
    }

    pub fn norm_witness(&self) -> Option<&FalsifierWitness> {
        self.witnesses.iter().find_map(|w| match w {
            Witness::Norm(f) => Some(f),
            _ => None,
        })
    }

    /// The complementary block from the canonical frame, when present.
    pub fn s(&self) -> Option<&MatrixMap> {
        self.canonical.as_ref().and_then(|c| c.s.as_ref())
    }
}

fn first_violation(reports: &[FalsifierReport]) -> Option<FalsifierWitness> {
    reports.iter().find_map(|r| r.violation.clone())
}

/// A norm-changing input for a map already known not to be completely
/// isometric, found by the descent search; `None` if the search fails.
fn shrink_witness(map: &MatrixMap, max_level: usize, options: &AnalyzeOptions) -> Option<FalsifierWitness> {
    let opts = FalsifierOptions {
        shrink: true,
        ..options.falsifier
    };
    let mut warm: Vec<ComplexMatrix> = Vec::new();
    for level in 1..=max_level {
        let refs: Vec<&ComplexMatrix> = warm.iter().collect();
        let report = falsify_at(map, level, &opts, Some(&refs)).ok()?;
        if let Some(w) = report.violation {
            return Some(w);
        }
        warm = vec![report.min_witness, report.max_witness];
    }
    None
}

/// `Q* T(a) P` where the columns of `Q`, `P` span the ranges of `q`, `p`.
fn corner_map(env: &EnvelopeResult) -> Option<MatrixMap> {
    if env.p.is_zero() || env.q.is_zero() {
        return None;
    }
    let qb = env.q.range_basis();
    let pb = env.p.range_basis();
    Some(env.map.compress(&qb.adjoint(), &pb).expect("shapes"))
}

pub fn analyze(map: &MatrixMap, options: &AnalyzeOptions) -> Decomposition {
    let c = map.codomain();
    let max_level = options.level.unwrap_or(c.rows.min(c.cols)).max(1);

    // (a) norm search: any violation refutes.
    let reports = falsify_levels(map, max_level, &options.falsifier, true).unwrap_or_default();
    let level_ratios: Vec<f64> = reports.iter().map(|r| r.max_ratio).collect();
    if let Some(w) = first_violation(&reports) {
        let mut d = Decomposition::new(Verdict::NotCompleteIsometry);
        d.level_ratios = level_ratios;
        d.witnesses.push(Witness::Norm(w));
        return d;
    }

    // (b) envelope.
    let env = match build_envelope(map, &options.envelope) {
        Err(Error::NotInjective { kernel }) => {
            let mut d = Decomposition::new(Verdict::NotCompleteIsometry);
            d.level_ratios = level_ratios;
            d.witnesses.push(Witness::Kernel(kernel));
            return d;
        }
        Err(e) => {
            let mut d = Decomposition::new(Verdict::Undecided);
            d.level_ratios = level_ratios;
            d.diagnostics.push(format!("envelope construction failed: {e}"));
            return d;
        }
        Ok(EnvelopeOutcome::Inconsistent(w)) => {
            let mut d = Decomposition::new(Verdict::NotCompleteIsometry);
            d.level_ratios = level_ratios;
            d.witnesses.push(Witness::Envelope(w));
            if let Some(norm) = shrink_witness(map, max_level, options) {
                d.witnesses.push(Witness::Norm(norm));
            }
            return d;
        }
        Ok(EnvelopeOutcome::Consistent(env)) => *env,
    };

    // (c) identities of the reduced map.
    let mut d = Decomposition::new(Verdict::Undecided);
    d.level_ratios = level_ratios;
    d.checks
        .extend(verify_theta_triple(&env, options.samples, options.seed, options.check_tol));
    d.checks.extend(verify_moce(&env, options.check_tol));
    d.checks.extend(verify_reducing(&env, options.check_tol));
    if !d.checks.all_passed() {
        for f in d.checks.failures() {
            d.diagnostics
                .push(format!("{}: residual {:.3e} > {:.1e}", f.name, f.residual, f.threshold));
        }
        d.env = Some(env);
        return d;
    }

    // Complete contractivity of the complementary corner.
    let corner = corner_map(&env);
    if let Some(s) = &corner {
        match cb_feasibility(s, &options.feasibility) {
            FeasibilityOutcome::Feasible(cert) => {
                d.checks.push("corner cb norm bound", cert.cb_bound - 1.0, options.feasibility.residual * 10.0);
                d.cc_certificate = Some(cert);
            }
            FeasibilityOutcome::Exhausted { lambda_min, iterations } => {
                d.diagnostics.push(format!(
                    "corner feasibility undecided after {iterations} iterations (lambda_min {lambda_min:.3e})"
                ));
            }
        }
    }
    d.corner = corner;
    if d.corner.is_some() && d.cc_certificate.is_none() {
        d.env = Some(env);
        return d;
    }

    match factor_triple_morphism(&env.theta, None, options.check_tol) {
        Ok(f) => {
            d.checks.extend(f.checks.clone());
            d.u = Some(f.u);
            d.pi = Some(f.pi);
            d.factor_side = Some(f.side);
        }
        Err(e) => d.diagnostics.push(format!("factorization failed: {e}")),
    }
    if c.is_square() && !env.p.is_zero() {
        if let Ok(view) = quotient_view(&env, d.u.as_ref(), d.pi.as_ref(), d.factor_side) {
            d.checks.push("quotient compression matches u pi", view, options.check_tol);
        }
    }
    if options.canonical {
        match canonical_form_of(&env) {
            Ok(cf) => {
                d.checks.push("canonical form reconstruction", cf.residual, options.check_tol);
                d.canonical = Some(cf);
            }
            Err(e) => d.diagnostics.push(format!("canonical form failed: {e}")),
        }
    }
    d.verdict = if d.checks.all_passed() && d.u.is_some() {
        Verdict::CompleteIsometry
    } else {
        Verdict::Undecided
    };
    d.env = Some(env);
    d
}

/// With `J = M_r p` and `K = q M_r`, the compression realizing
/// `M_r / (J + K)` sends `T(a)` to `u π(a)`; returns the largest mismatch.
fn quotient_view(
    env: &EnvelopeResult,
    u: Option<&ComplexMatrix>,
    pi: Option<&MatrixMap>,
    side: Option<FactorSide>,
) -> Result<f64> {
    let (u, pi, side) = match (u, pi, side) {
        (Some(u), Some(pi), Some(side)) => (u, pi, side),
        _ => return Err(Error::Precondition("no factorization".into())),
    };
    let b = env.map.codomain();
    let tol = 1e-9;
    let j = MatrixSubspace::span(b, b.units().map(|e| e * env.p.matrix()), tol)?;
    let k = MatrixSubspace::span(b, b.units().map(|e| env.q.matrix() * e), tol)?;
    let qc = quotient_compression(b, &j, &k, tol)?;
    let mut worst: f64 = 0.0;
    for (idx, t) in env.map.action().iter().enumerate() {
        let a = env.map.domain().unit(idx / env.map.domain().cols, idx % env.map.domain().cols);
        let pa = pi.apply(&a)?;
        let rhs = match side {
            FactorSide::Right => u * pa,
            FactorSide::Left => pa * u,
        };
        worst = worst.max(frobenius(&(qc.apply(t) - rhs)));
    }
    Ok(worst)
}

/// `u = θ(e)` for the domain unit `e` (or `Σ_{i<min(m,n)} E_ii` when none is
/// given) and the induced map `π`.
pub fn factor_triple_morphism(theta: &MatrixMap, unital_element: Option<&ComplexMatrix>, tol: f64) -> Result<Factorization> {
    let d = theta.domain();
    let scale = theta.action().iter().map(op_norm).fold(1.0, f64::max).powi(3);
    let triple = unit_triple_residual(theta);
    if triple > tol * scale {
        return Err(Error::Structure(format!(
            "not a triple morphism (residual {triple:.3e})"
        )));
    }
    let w = match unital_element {
        Some(e) => {
            d.check(e)?;
            e.clone()
        }
        None => ComplexMatrix::from_fn(d.rows, d.cols, |i, j| if i == j { real(1.0) } else { C64::default() }),
    };
    let u = theta.apply(&w)?;
    let side = if d.rows <= d.cols { FactorSide::Right } else { FactorSide::Left };
    let pi = match side {
        FactorSide::Right => {
            let sh = Shape { rows: u.ncols(), cols: theta.codomain().cols };
            MatrixMap::from_fn(d, sh, |a| u.adjoint() * theta.apply(a).expect("shape"))?
        }
        FactorSide::Left => {
            let sh = Shape { rows: theta.codomain().rows, cols: u.nrows() };
            MatrixMap::from_fn(d, sh, |a| theta.apply(a).expect("shape") * u.adjoint())?
        }
    };

    let mut checks = CheckReport::new();
    checks.push("u is a partial isometry", partial_isometry_residual(&u), tol);
    let mut recon: f64 = 0.0;
    let mut unit_action: f64 = 0.0;
    let uu = match side {
        FactorSide::Right => u.adjoint() * &u,
        FactorSide::Left => &u * u.adjoint(),
    };
    for (k, t) in theta.action().iter().enumerate() {
        let pa = &pi.action()[k];
        let rebuilt = match side {
            FactorSide::Right => &u * pa,
            FactorSide::Left => pa * &u,
        };
        recon = recon.max(frobenius(&(t - rebuilt)));
        let absorbed = match side {
            FactorSide::Right => &uu * pa,
            FactorSide::Left => pa * &uu,
        };
        unit_action = unit_action.max(frobenius(&(absorbed - pa)));
    }
    checks.push("theta = u pi", recon, tol);
    if d.is_square() {
        checks.push("u*u is a unit on the range of pi", unit_action, tol);
        let units: Vec<ComplexMatrix> = d.units().collect();
        let mut mult: f64 = 0.0;
        let mut star: f64 = 0.0;
        for (i, a) in units.iter().enumerate() {
            let pa = &pi.action()[i];
            star = star.max(frobenius(&(pi.apply(&a.adjoint())? - pa.adjoint())));
            for (j, b) in units.iter().enumerate() {
                let pb = &pi.action()[j];
                mult = mult.max(frobenius(&(pi.apply(&(a * b))? - pa * pb)));
            }
        }
        checks.push("pi is multiplicative", mult, tol);
        checks.push("pi preserves adjoints", star, tol);
    }
    if !checks.all_passed() {
        let failed: Vec<String> = checks.failures().map(|c| c.name.clone()).collect();
        return Err(Error::Structure(format!("factorization checks failed: {}", failed.join(", "))));
    }
    Ok(Factorization { u, pi, side, checks })
}

/// Rotates a vector so its largest-modulus component is real and positive.
fn fix_phase(v: &mut ComplexMatrix) {
    let mut best = C64::default();
    for z in v.iter() {
        if z.norm() > best.norm() + 1e-12 {
            best = *z;
        }
    }
    if best.norm() > 0.0 {
        let phase = best.conj() / real(best.norm());
        *v *= phase;
    }
}

fn canonical_form_of(env: &EnvelopeResult) -> Result<CanonicalForm> {
    let theta = &env.theta;
    let (d, c) = (theta.domain(), theta.codomain());
    let t11 = theta.image_of_unit(0, 0);
    let k = rank(t11, 1e-6);
    if k == 0 {
        return Err(Error::Structure("theta(E_11) = 0: multiplicity zero".into()));
    }
    let mut phi = ComplexMatrix::from_column_slice(c.rows, 1, top_singular(t11).1.as_slice());
    fix_phase(&mut phi);
    let gamma = t11.adjoint() * &phi;

    let mut f = ComplexMatrix::zeros(c.rows, d.rows);
    for i in 0..d.rows {
        f.set_column(i, &(theta.image_of_unit(i, 0) * &gamma).column(0));
    }
    let mut g = ComplexMatrix::zeros(c.cols, d.cols);
    for j in 0..d.cols {
        g.set_column(j, &(theta.image_of_unit(0, j).adjoint() * &phi).column(0));
    }
    let f = polar_isometry(&f);
    let g = polar_isometry(&g);
    let f_perp = orthonormal_complement(&f, 1e-9);
    let g_perp = orthonormal_complement(&g, 1e-9);
    let mut u = ComplexMatrix::zeros(c.rows, c.rows);
    u.view_mut((0, 0), (c.rows, d.rows)).copy_from(&f);
    u.view_mut((0, d.rows), f_perp.shape()).copy_from(&f_perp);
    let u = u.adjoint();
    let mut v = ComplexMatrix::zeros(c.cols, c.cols);
    v.view_mut((0, 0), (c.cols, d.cols)).copy_from(&g);
    v.view_mut((0, d.cols), g_perp.shape()).copy_from(&g_perp);

    let (rr, ss) = (c.rows - d.rows, c.cols - d.cols);
    let s = if rr > 0 && ss > 0 {
        Some(env.map.compress(&f_perp.adjoint(), &g_perp)?)
    } else {
        None
    };
    let mut residual: f64 = 0.0;
    for (idx, t) in env.map.action().iter().enumerate() {
        let e = d.unit(idx / d.cols, idx % d.cols);
        let mut expected = c.zeros();
        expected.view_mut((0, 0), (d.rows, d.cols)).copy_from(&e);
        if let Some(s) = &s {
            expected
                .view_mut((d.rows, d.cols), (rr, ss))
                .copy_from(&s.action()[idx]);
        }
        residual = residual.max(frobenius(&(&u * t * &v - expected)));
    }
    Ok(CanonicalForm {
        u,
        v,
        multiplicity: k,
        s,
        residual,
    })
}

/// Unitaries `U`, `V` with `U T(x) V = diag(x, S(x))`.
pub fn canonical_form(map: &MatrixMap, options: &AnalyzeOptions) -> Result<CanonicalForm> {
    let d = analyze(map, &AnalyzeOptions { canonical: true, ..*options });
    if d.verdict != Verdict::CompleteIsometry {
        return Err(Error::Precondition(format!("verdict is {}", d.verdict)));
    }
    d.canonical
        .ok_or_else(|| Error::Structure(d.diagnostics.join("; ")))
}

#[derive(Debug, Clone)]
pub struct UnitalSplit {
    /// `a -> (1-p) T(a) (1-p)` on the range of `1 - p`.
    pub pi: MatrixMap,
    /// `a -> p T(a) p` on the range of `p`; absent when `p = 0`.
    pub s: Option<MatrixMap>,
    pub p: Projection,
    pub checks: CheckReport,
}

pub fn unital_split(map: &MatrixMap, options: &AnalyzeOptions) -> Result<UnitalSplit> {
    let (d, c) = (map.domain(), map.codomain());
    if !d.is_square() || !c.is_square() {
        return Err(Error::Precondition("unital split needs square shapes".into()));
    }
    let t1 = map.apply(&identity(d.rows))?;
    let unit_gap = frobenius(&(&t1 - identity(c.rows)));
    if unit_gap > options.check_tol {
        return Err(Error::Precondition(format!("T(1) differs from 1 by {unit_gap:.3e}")));
    }
    let dec = analyze(map, options);
    if dec.verdict != Verdict::CompleteIsometry {
        return Err(Error::Precondition(format!("verdict is {}", dec.verdict)));
    }
    let env = dec.env.expect("certified maps carry an envelope");
    let tol = options.check_tol;
    let mut checks = CheckReport::new();
    checks.push("p = q", frobenius(&(env.p.matrix() - env.q.matrix())), tol);
    let (pm, pc) = (env.p.matrix().clone(), env.p.complement());
    let mut off: f64 = 0.0;
    for t in map.action() {
        off = off
            .max(frobenius(&(&pm * t * pc.matrix())))
            .max(frobenius(&(pc.matrix() * t * &pm)));
    }
    checks.push("off-diagonal corners vanish", off, tol);

    let b0 = range_basis(pc.matrix(), 0.5);
    let pi = map.compress(&b0.adjoint(), &b0)?;
    let units: Vec<ComplexMatrix> = d.units().collect();
    let mut mult: f64 = 0.0;
    for (i, a) in units.iter().enumerate() {
        for (j, b) in units.iter().enumerate() {
            mult = mult.max(frobenius(&(pi.apply(&(a * b))? - &pi.action()[i] * &pi.action()[j])));
        }
    }
    checks.push("pi is multiplicative", mult, tol);
    let pi_unit = pi.apply(&identity(d.rows))?;
    checks.push("pi is unital", frobenius(&(&pi_unit - identity(pi_unit.nrows()))), tol);

    let s = if env.p.is_zero() {
        None
    } else {
        let b1 = env.p.range_basis();
        let s = map.compress(&b1.adjoint(), &b1)?;
        let cp = is_completely_positive(&s, tol)?;
        checks.push("S is completely positive", (-cp.min_eigenvalue).max(0.0), tol);
        let su = s.apply(&identity(d.rows))?;
        checks.push("S is unital", frobenius(&(&su - identity(su.nrows()))), tol);
        Some(s)
    };
    Ok(UnitalSplit {
        pi,
        s,
        p: env.p,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialIsometryClass {
    Unitary,
    Isometry,
    Coisometry,
}

pub fn classify(x: &ComplexMatrix, tol: f64) -> Option<PartialIsometryClass> {
    let iso = frobenius(&(x.adjoint() * x - identity(x.ncols()))) <= tol;
    let co = frobenius(&(x * x.adjoint() - identity(x.nrows()))) <= tol;
    match (iso, co) {
        (true, true) => Some(PartialIsometryClass::Unitary),
        (true, false) => Some(PartialIsometryClass::Isometry),
        (false, true) => Some(PartialIsometryClass::Coisometry),
        (false, false) => None,
    }
}

/// If `T(a0)` is a unitary (isometry, coisometry), then `T(1)(1-p)` is one
/// of the corner `(1-q) M (1-p)`, and `T(·)(1-p) = U π(·)`.
pub fn check_unin(map: &MatrixMap, a0: &ComplexMatrix, options: &AnalyzeOptions) -> Result<CheckReport> {
    let d = map.domain();
    if !d.is_square() {
        return Err(Error::Precondition("domain must be a unital algebra".into()));
    }
    let tol = options.check_tol;
    let class = classify(&map.apply(a0)?, tol)
        .ok_or_else(|| Error::Precondition("T(a0) is not a unitary, isometry or coisometry".into()))?;
    let dec = analyze(map, options);
    if dec.verdict != Verdict::CompleteIsometry {
        return Err(Error::Precondition(format!("verdict is {}", dec.verdict)));
    }
    let env = dec.env.expect("certified maps carry an envelope");
    let (pc, qc) = (env.p.complement(), env.q.complement());
    let qb = range_basis(qc.matrix(), 0.5);
    let pb = range_basis(pc.matrix(), 0.5);
    let t1 = map.apply(&identity(d.rows))?;
    let corner_u = qb.adjoint() * &t1 * &pb;
    let mut report = CheckReport::new();
    let iso = frobenius(&(corner_u.adjoint() * &corner_u - identity(corner_u.ncols())));
    let co = frobenius(&(&corner_u * corner_u.adjoint() - identity(corner_u.nrows())));
    match class {
        PartialIsometryClass::Unitary => {
            report.push("corner element is an isometry", iso, tol);
            report.push("corner element is a coisometry", co, tol);
        }
        PartialIsometryClass::Isometry => report.push("corner element is an isometry", iso, tol),
        PartialIsometryClass::Coisometry => report.push("corner element is a coisometry", co, tol),
    }
    let big_u = &t1 * pc.matrix();
    let f = factor_triple_morphism(&env.theta, Some(&identity(d.rows)), tol)?;
    let mut recon: f64 = 0.0;
    for (k, t) in map.action().iter().enumerate() {
        recon = recon.max(frobenius(&(t * pc.matrix() - &big_u * &f.pi.action()[k])));
    }
    report.push("T(a)(1-p) = U pi(a)", recon, tol);
    Ok(report)
}
