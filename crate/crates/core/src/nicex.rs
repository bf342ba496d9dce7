//! A truncated direct sum of unital coordinate averages on `ℓ∞_n` whose
//! kernel projection cannot be realized on the represented space.
//!
//! Level `k` maps `a` to `ψ_k(a)_r = (1 - ε_k) a_r + ε_k/(n-1) Σ_{j≠r} a_j`.
//! The stacked map `Ψ = ψ_1 ⊕ … ⊕ ψ_K` lands in diagonal `nK × nK` matrices.
//! No nonzero diagonal projection `w` makes `a -> w Ψ(a)` multiplicative,
//! and every projection commuting with the images `Ψ(e_i)` is diagonal.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::algebra::commutant;
use crate::error::{Error, Result};
use crate::linmap::MatrixMap;
use crate::matrix::{block_diag, frobenius, random_gaussian, real, seeded_rng, ComplexMatrix, Shape, C64};

/// Largest `nK` accepted by the exhaustive projection search.
pub const MAX_ENUMERATION: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `ℓ∞_n` as the diagonal of `M_n`; off-diagonal input entries are ignored.
    Diagonal,
    /// `ψ_k` extended to `M_n` by scaling off-diagonal entries by `1 - ε_k`.
    Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NicexConfig {
    pub n: usize,
    pub epsilons: Vec<f64>,
}

impl Default for NicexConfig {
    fn default() -> Self {
        NicexConfig::harmonic(3, 4)
    }
}

impl NicexConfig {
    /// `ε_k = 1/(k+2)` for `k = 1..=levels`.
    pub fn harmonic(n: usize, levels: usize) -> Self {
        NicexConfig {
            n,
            epsilons: (1..=levels).map(|k| 1.0 / (k as f64 + 2.0)).collect(),
        }
    }

    pub fn levels(&self) -> usize {
        self.epsilons.len()
    }

    /// Rejects configurations where two coordinates of `Ψ` carry the same
    /// tuple of values on `e_1, …, e_n`; the commutant of the images would
    /// then contain off-diagonal matrices.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n = {} but at least 2 coordinates are needed", self.n)));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Config("at least one level is needed".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::Config(format!("epsilon {e} outside (0, 1)")));
        }
        if let Some(w) = self.epsilons.windows(2).find(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "epsilons must decrease strictly: {} then {}",
                w[0], w[1]
            )));
        }
        let tuples: Vec<Vec<f64>> = (0..self.levels())
            .flat_map(|k| (0..self.n).map(move |r| (k, r)))
            .map(|(k, r)| (0..self.n).map(|i| self.weight(k, r, i)).collect())
            .collect();
        for (s, a) in tuples.iter().enumerate() {
            for (t, b) in tuples.iter().enumerate().skip(s + 1) {
                if a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9) {
                    return Err(Error::Config(format!(
                        "coordinates {s} and {t} of the stacked map coincide on every e_i"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `ψ_k(e_i)_r`.
    fn weight(&self, k: usize, r: usize, i: usize) -> f64 {
        let e = self.epsilons[k];
        if r == i {
            1.0 - e
        } else {
            e / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NicexMaps {
    pub mode: Mode,
    /// Per-level maps `M_n -> M_n`. Empty for control maps.
    pub psi: Vec<MatrixMap>,
    /// Block-diagonal stack into `M_{nK}`.
    pub stacked: MatrixMap,
    /// `ε_k` per level; empty for control maps.
    pub epsilons: Vec<f64>,
}

fn level_map(config: &NicexConfig, k: usize, mode: Mode) -> Result<MatrixMap> {
    let n = config.n;
    let shape = Shape::square(n)?;
    let e = config.epsilons[k];
    MatrixMap::from_fn(shape, shape, |x| {
        ComplexMatrix::from_fn(n, n, |r, c| {
            if r == c {
                (0..n).map(|i| x[(i, i)] * real(config.weight(k, r, i))).sum()
            } else {
                match mode {
                    Mode::Diagonal => C64::default(),
                    Mode::Matrix => x[(r, c)] * real(1.0 - e),
                }
            }
        })
    })
}

fn stack(parts: &[MatrixMap], copies: usize) -> Result<MatrixMap> {
    let d = parts[0].domain();
    let total: usize = parts.iter().map(|p| p.codomain().rows).sum::<usize>() * copies;
    let cod = Shape::square(total)?;
    MatrixMap::from_fn(d, cod, |x| {
        let images: Vec<ComplexMatrix> = parts.iter().map(|p| p.apply(x).expect("domain shape")).collect();
        let blocks: Vec<&ComplexMatrix> = (0..copies).flat_map(|_| images.iter()).collect();
        block_diag(&blocks)
    })
}

pub fn build(config: &NicexConfig, mode: Mode) -> Result<NicexMaps> {
    config.validate()?;
    let psi = (0..config.levels())
        .map(|k| level_map(config, k, mode))
        .collect::<Result<Vec<_>>>()?;
    let stacked = stack(&psi, 1)?;
    Ok(NicexMaps {
        mode,
        psi,
        stacked,
        epsilons: config.epsilons.clone(),
    })
}

/// The honest block map `x -> diag(x, x)` on `M_n` (or on its diagonal).
pub fn control(n: usize, mode: Mode) -> Result<NicexMaps> {
    let shape = Shape::square(n)?;
    let id = match mode {
        Mode::Matrix => MatrixMap::identity(shape),
        Mode::Diagonal => MatrixMap::from_fn(shape, shape, |x| {
            ComplexMatrix::from_fn(n, n, |r, c| if r == c { x[(r, c)] } else { C64::default() })
        })?,
    };
    Ok(NicexMaps {
        mode,
        psi: Vec::new(),
        stacked: stack(&[id], 2)?,
        epsilons: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub samples: usize,
    /// Count of `(a, k)` with `‖ψ_k(a)‖∞ < (1 - 2ε_k)‖a‖∞ - tol`.
    pub level_violations: usize,
    /// Count of `a` with `max_k ‖ψ_k(a)‖∞ < (1 - 2ε_K)‖a‖∞ - tol`.
    pub sup_violations: usize,
    /// Count of `a` with `‖Ψ(a)‖∞ > ‖a‖∞ + tol`.
    pub contraction_violations: usize,
    /// Smallest `‖ψ_k(a)‖∞ / ‖a‖∞ - (1 - 2ε_k)` seen.
    pub worst_margin: f64,
}

fn sup_norm(v: impl Iterator<Item = C64>) -> f64 {
    v.map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn lower_bound_check(maps: &NicexMaps, samples: usize, rng_seed: u64, tol: f64) -> LowerBoundReport {
    let n = maps.stacked.domain().rows;
    let mut rng = seeded_rng(rng_seed);
    let mut report = LowerBoundReport {
        samples,
        level_violations: 0,
        sup_violations: 0,
        contraction_violations: 0,
        worst_margin: f64::INFINITY,
    };
    let last = maps.epsilons.last().copied().unwrap_or(0.0);
    for _ in 0..samples {
        let spread = rng.random_range(0.1..10.0);
        let v = random_gaussian(n, 1, &mut rng);
        let a = ComplexMatrix::from_diagonal(&v.column(0).map(|z| z * spread));
        let norm_a = sup_norm(a.diagonal().iter().copied());
        let mut best = 0.0f64;
        for (psi, e) in maps.psi.iter().zip(&maps.epsilons) {
            let image = sup_norm(psi.apply(&a).expect("domain shape").diagonal().iter().copied());
            best = best.max(image);
            report.worst_margin = report.worst_margin.min(image / norm_a - (1.0 - 2.0 * e));
            if image < (1.0 - 2.0 * e) * norm_a - tol {
                report.level_violations += 1;
            }
        }
        if !maps.psi.is_empty() && best < (1.0 - 2.0 * last) * norm_a - tol {
            report.sup_violations += 1;
        }
        let whole = sup_norm(maps.stacked.apply(&a).expect("domain shape").diagonal().iter().copied());
        if whole > norm_a + tol {
            report.contraction_violations += 1;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutantReport {
    pub size: usize,
    pub dimension: usize,
    /// Every commutant element is diagonal.
    pub diagonal: bool,
}

/// Commutant of `D_i = Ψ(E_ii)` inside `M_{nK}`.
pub fn commutant_check(maps: &NicexMaps, tol: f64) -> Result<CommutantReport> {
    let n = maps.stacked.domain().rows;
    let images: Vec<ComplexMatrix> = (0..n).map(|i| maps.stacked.image_of_unit(i, i).clone()).collect();
    let comm = commutant(&images, tol)?;
    let size = maps.stacked.codomain().rows;
    let diagonal = comm.dim() == size
        && comm.basis().iter().all(|b| {
            let off = b - ComplexMatrix::from_diagonal(&b.diagonal());
            frobenius(&off) <= 1e-8
        });
    Ok(CommutantReport {
        size,
        dimension: comm.dim(),
        diagonal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub commutant: CommutantReport,
    pub masks_tried: u64,
    /// Surviving `1 - p` as bitmasks over the `nK` coordinates.
    pub survivors: Vec<u32>,
}

impl ProjectionReport {
    /// Only `1 - p = 0` survives, so the compressed map is zero.
    pub fn only_zero_map(&self) -> bool {
        self.survivors == [0]
    }
}

/// Exhaustive search over diagonal projections `w = 1 - p` for which
/// `a -> wΨ(a)` commutes with `w` and is multiplicative (diagonal mode) or
/// preserves `a b* c` (matrix mode).
///
/// Because `w` is diagonal, `w X = 0` splits into rows and `[w, X] = 0`
/// into coordinate pairs, so each mask is checked against per-row defect
/// flags and a coupling graph.
pub fn no_projection_check(maps: &NicexMaps, tol: f64) -> Result<ProjectionReport> {
    let size = maps.stacked.codomain().rows;
    if size > MAX_ENUMERATION {
        return Err(Error::EnumerationRefused(format!(
            "{size} coordinates give 2^{size} projections; the limit is {MAX_ENUMERATION}"
        )));
    }
    let commutant = commutant_check(maps, tol)?;
    let map = &maps.stacked;
    let n = map.domain().rows;
    let units: Vec<(usize, usize)> = match maps.mode {
        Mode::Diagonal => (0..n).map(|i| (i, i)).collect(),
        Mode::Matrix => (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
    };
    let unit = |(i, j): (usize, usize)| {
        let mut e = ComplexMatrix::zeros(n, n);
        e[(i, j)] = real(1.0);
        e
    };
    let image = |u: (usize, usize)| map.image_of_unit(u.0, u.1);

    let mut defects: Vec<ComplexMatrix> = Vec::new();
    match maps.mode {
        Mode::Diagonal => {
            for &a in &units {
                for &b in &units {
                    let prod = unit(a) * unit(b);
                    defects.push(map.apply(&prod)? - image(a) * image(b));
                }
            }
        }
        Mode::Matrix => {
            for &a in &units {
                for &b in &units {
                    let left = unit(a) * unit(b).adjoint();
                    let mid = image(a) * image(b).adjoint();
                    for &c in &units {
                        defects.push(map.apply(&(&left * unit(c)))? - &mid * image(c));
                    }
                }
            }
        }
    }
    let mut bad_rows: u32 = 0;
    for d in &defects {
        for t in 0..size {
            if d.row(t).iter().any(|z| z.norm() > tol) {
                bad_rows |= 1 << t;
            }
        }
    }
    let mut coupled = vec![0u32; size];
    for &u in &units {
        let x = image(u);
        for s in 0..size {
            for t in 0..size {
                if s != t && (x[(s, t)].norm() > tol || x[(t, s)].norm() > tol) {
                    coupled[s] |= 1 << t;
                }
            }
        }
    }

    let total: u64 = 1u64 << size;
    let mut survivors = Vec::new();
    for mask in 0..total {
        let w = mask as u32;
        if w & bad_rows != 0 {
            continue;
        }
        let closed = (0..size).all(|t| {
            let inside = w & (1 << t) != 0;
            let reach = coupled[t];
            if inside {
                reach & !w == 0
            } else {
                reach & w == 0
            }
        });
        if closed {
            survivors.push(w);
        }
    }
    Ok(ProjectionReport {
        commutant,
        masks_tried: total,
        survivors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbnorm::{is_completely_positive, op_norm};
    use crate::matrix::{diag_real, identity};

    fn diag_of(m: &ComplexMatrix) -> Vec<f64> {
        m.diagonal().iter().map(|z| z.re).collect()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn level_formula_examples() {
        let maps = build(&NicexConfig::harmonic(3, 1), Mode::Diagonal).unwrap();
        let image = maps.psi[0].apply(&diag_real(&[1.0, 0.0, 0.0])).unwrap();
        assert!(close(&diag_of(&image), &[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]));

        let cfg = NicexConfig { n: 2, epsilons: vec![0.25] };
        let maps = build(&cfg, Mode::Diagonal).unwrap();
        let (a1, a2) = (0.7, -1.3);
        let image = maps.psi[0].apply(&diag_real(&[a1, a2])).unwrap();
        assert!(close(&diag_of(&image), &[0.75 * a1 + 0.25 * a2, 0.25 * a1 + 0.75 * a2]));
    }

    #[test]
    fn levels_are_unital_stochastic_and_cp() {
        let cfg = NicexConfig::default();
        for mode in [Mode::Diagonal, Mode::Matrix] {
            let maps = build(&cfg, mode).unwrap();
            for psi in &maps.psi {
                assert!(frobenius(&(psi.apply(&identity(3)).unwrap() - identity(3))) < 1e-14);
                for i in 0..3 {
                    let col = diag_of(psi.image_of_unit(i, i));
                    assert!(col.iter().all(|v| *v >= 0.0));
                }
                assert!(is_completely_positive(psi, 1e-12).unwrap().positive);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(NicexConfig::default().validate().is_ok());
        assert!(NicexConfig { n: 3, epsilons: vec![0.3, 0.3] }.validate().is_err());
        assert!(NicexConfig { n: 3, epsilons: vec![0.2, 0.3] }.validate().is_err());
        assert!(NicexConfig { n: 3, epsilons: vec![1.0] }.validate().is_err());
        assert!(NicexConfig { n: 1, epsilons: vec![0.5] }.validate().is_err());
        // 1 - ε = ε/(n-1) at ε = (n-1)/n.
        assert!(NicexConfig { n: 2, epsilons: vec![0.5] }.validate().is_err());
        // n = 2 levels with ε + ε' = 1 swap coordinates.
        assert!(NicexConfig { n: 2, epsilons: vec![0.7, 0.3] }.validate().is_err());
    }

    #[test]
    fn lower_bounds_hold() {
        let e1 = build(&NicexConfig::harmonic(3, 1), Mode::Diagonal).unwrap();
        let image = e1.psi[0].apply(&diag_real(&[1.0, 0.0, 0.0])).unwrap();
        assert!((op_norm(&image) - 2.0 / 3.0).abs() < 1e-14);

        let maps = build(&NicexConfig::harmonic(4, 5), Mode::Diagonal).unwrap();
        let report = lower_bound_check(&maps, 1000, 3, 1e-12);
        assert_eq!(report.level_violations, 0);
        assert_eq!(report.sup_violations, 0);
        assert_eq!(report.contraction_violations, 0);
        for psi in &maps.psi {
            let ones = psi.apply(&identity(4)).unwrap();
            assert!((sup_norm(ones.diagonal().iter().copied()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn small_enumerations_leave_only_the_zero_map() {
        for n in [2, 3] {
            let cfg = NicexConfig { n, epsilons: vec![1.0 / 3.0, 1.0 / 5.0] };
            let report = no_projection_check(&build(&cfg, Mode::Diagonal).unwrap(), 1e-9).unwrap();
            assert_eq!(report.masks_tried, 1 << (2 * n));
            assert!(report.only_zero_map());
            assert_eq!(report.commutant.dimension, 2 * n);
            assert!(report.commutant.diagonal);
        }
    }

    #[test]
    fn matrix_mode_and_controls() {
        let report = no_projection_check(&build(&NicexConfig::default(), Mode::Matrix).unwrap(), 1e-9).unwrap();
        assert!(report.only_zero_map());
        for mode in [Mode::Diagonal, Mode::Matrix] {
            let report = no_projection_check(&control(3, mode).unwrap(), 1e-9).unwrap();
            assert!(report.survivors.len() > 1);
            assert!(report.survivors.contains(&0b111_111));
        }
    }

    #[test]
    fn oversized_enumeration_is_refused() {
        let maps = build(&NicexConfig::harmonic(5, 5), Mode::Diagonal).unwrap();
        assert!(matches!(no_projection_check(&maps, 1e-9), Err(Error::EnumerationRefused(_))));
        assert_eq!(commutant_check(&maps, 1e-9).unwrap().dimension, 25);
    }
}
