//! Isometries between algebras of functions on finite sets.
//!
//! A linear `T: ℓ∞_{k1} -> ℓ∞_{k2}` is stored as its `k2 × k1` matrix; row
//! `y` is the functional `f -> T(f)(y)`. Such a `T` is an isometry exactly
//! when it is contractive and, on some set `E` of output points, acts as a
//! weighted composition `T(f)(y) = γ(y) f(φ(y))` with `φ` onto.
//!
//! Indices are zero-based throughout.

use std::collections::BTreeSet;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::{c64, random_gaussian, ComplexMatrix, Rng, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CommutativeMap {
    k1: usize,
    k2: usize,
    matrix: ComplexMatrix,
}

impl CommutativeMap {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let (k2, k1) = matrix.shape();
        if k1 == 0 || k2 == 0 {
            return Err(Error::Argument(format!("empty commutative map {k2}×{k1}")));
        }
        Ok(CommutativeMap { k1, k2, matrix })
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        assert_eq!(f.len(), self.k1, "input length");
        (0..self.k2)
            .map(|y| (0..self.k1).map(|x| self.matrix[(y, x)] * f[x]).sum())
            .collect()
    }

    fn row_sum(&self, y: usize) -> f64 {
        (0..self.k1).map(|x| self.matrix[(y, x)].norm()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolsztynskiCertificate {
    /// Output points carrying a single unimodular entry, ascending.
    pub e: Vec<usize>,
    /// `gamma[i]` is the weight at `e[i]`.
    pub gamma: Vec<C64>,
    /// `phi[i]` is the input point read at `e[i]`.
    pub phi: Vec<usize>,
    pub surjective: bool,
    /// Input points outside the image of `phi`.
    pub uncovered: Vec<usize>,
}

/// The ℓ∞ → ℓ∞ norm is the largest absolute row sum.
pub fn contractive(cm: &CommutativeMap, tol: f64) -> bool {
    (0..cm.k2).all(|y| cm.row_sum(y) <= 1.0 + tol)
}

pub fn extract_certificate(cm: &CommutativeMap, tol: f64) -> HolsztynskiCertificate {
    let mut e = Vec::new();
    let mut gamma = Vec::new();
    let mut phi = Vec::new();
    for y in 0..cm.k2 {
        let big: Vec<usize> = (0..cm.k1).filter(|&x| cm.matrix[(y, x)].norm() >= 1.0 - tol).collect();
        let [x] = big[..] else { continue };
        let rest_small = (0..cm.k1).all(|j| j == x || cm.matrix[(y, j)].norm() <= tol);
        if rest_small {
            e.push(y);
            gamma.push(cm.matrix[(y, x)]);
            phi.push(x);
        }
    }
    let covered: BTreeSet<usize> = phi.iter().copied().collect();
    let uncovered: Vec<usize> = (0..cm.k1).filter(|x| !covered.contains(x)).collect();
    HolsztynskiCertificate {
        surjective: uncovered.is_empty(),
        e,
        gamma,
        phi,
        uncovered,
    }
}

pub fn isometry_verdict(cm: &CommutativeMap, tol: f64) -> bool {
    contractive(cm, tol) && extract_certificate(cm, tol).surjective
}

/// Largest `|T(f)(y) - γ(y) f(φ(y))|` over the certificate's points.
pub fn certificate_residual(cm: &CommutativeMap, cert: &HolsztynskiCertificate, f: &[C64]) -> f64 {
    let tf = cm.apply(f);
    cert.e
        .iter()
        .zip(&cert.gamma)
        .zip(&cert.phi)
        .map(|((&y, &g), &x)| (tf[y] - g * f[x]).norm())
        .fold(0.0, f64::max)
}

/// Options for [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub k1: usize,
    pub k2: usize,
    /// Number of composition rows; at least `k1` for a surjective `φ`.
    pub composition_rows: usize,
    pub surjective: bool,
    /// Real data: weights `±1` and real junk rows.
    pub real: bool,
}

/// A contractive map with rows in random order: `composition_rows` rows
/// `γ(y) e_{φ(y)}`, the rest contractive junk whose entries stay below
/// `1/2` in modulus. Returns the planted certificate.
pub fn synthesize(spec: &SynthSpec, rng: &mut Rng) -> Result<(CommutativeMap, HolsztynskiCertificate)> {
    let SynthSpec {
        k1,
        k2,
        composition_rows,
        surjective,
        real,
    } = *spec;
    if k1 == 0 || composition_rows > k2 || (surjective && composition_rows < k1) {
        return Err(Error::Argument(format!(
            "cannot plant {composition_rows} composition rows into {k2} outputs over {k1} inputs"
        )));
    }
    if !surjective && k1 < 2 && composition_rows > 0 {
        return Err(Error::Argument("a single input point is always covered".into()));
    }
    let mut targets: Vec<usize> = if surjective {
        let mut t: Vec<usize> = (0..k1).collect();
        t.extend((k1..composition_rows).map(|_| rng.random_range(0..k1)));
        t
    } else {
        let missed = rng.random_range(0..k1);
        (0..composition_rows)
            .map(|_| loop {
                let x = rng.random_range(0..k1);
                if x != missed {
                    break x;
                }
            })
            .collect()
    };
    targets.resize(k2, usize::MAX);
    for i in (1..k2).rev() {
        targets.swap(i, rng.random_range(0..=i));
    }

    let mut matrix = ComplexMatrix::zeros(k2, k1);
    let mut cert = HolsztynskiCertificate {
        e: Vec::new(),
        gamma: Vec::new(),
        phi: Vec::new(),
        surjective: false,
        uncovered: Vec::new(),
    };
    for (y, &x) in targets.iter().enumerate() {
        if x == usize::MAX {
            let junk = if real {
                random_gaussian(1, k1, rng).map(|z| c64(z.re, 0.0))
            } else {
                random_gaussian(1, k1, rng)
            };
            let sum: f64 = junk.iter().map(|z| z.norm()).sum();
            let cap = (1.0f64).min(0.49 * sum / junk.iter().map(|z| z.norm()).fold(0.0, f64::max));
            let budget = rng.random_range(0.2..1.0) * cap;
            for j in 0..k1 {
                matrix[(y, j)] = junk[(0, j)] * (budget / sum);
            }
        } else {
            let g = if real {
                if rng.random::<bool>() { c64(1.0, 0.0) } else { c64(-1.0, 0.0) }
            } else {
                C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            };
            matrix[(y, x)] = g;
            cert.e.push(y);
            cert.gamma.push(g);
            cert.phi.push(x);
        }
    }
    let covered: BTreeSet<usize> = cert.phi.iter().copied().collect();
    cert.uncovered = (0..k1).filter(|x| !covered.contains(x)).collect();
    cert.surjective = cert.uncovered.is_empty();
    Ok((CommutativeMap::new(matrix)?, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{from_real_rows, identity, seeded_rng};

    fn rows(r: &[&[f64]]) -> CommutativeMap {
        CommutativeMap::new(from_real_rows(r)).unwrap()
    }

    /// `max_y |T(f)(y)| = max_x |f_x|` over `f ∈ {-1, 0, 1}^k1`.
    fn brute_isometry(cm: &CommutativeMap, tol: f64) -> bool {
        let k1 = cm.k1();
        let mut f = vec![C64::default(); k1];
        for code in 0..3usize.pow(k1 as u32) {
            let mut c = code;
            for v in f.iter_mut() {
                *v = c64((c % 3) as f64 - 1.0, 0.0);
                c /= 3;
            }
            let input = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let output = cm.apply(&f).iter().map(|v| v.norm()).fold(0.0, f64::max);
            if (output - input).abs() > tol {
                return false;
            }
        }
        true
    }

    #[test]
    fn contractive_examples() {
        assert!(contractive(&CommutativeMap::new(identity(3)).unwrap(), 1e-12));
        assert!(!contractive(&rows(&[&[0.6, 0.6]]), 1e-12));
        assert!(contractive(&rows(&[&[1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.5, 0.5, 0.0]]), 1e-12));
    }

    #[test]
    fn certificate_examples() {
        let id = extract_certificate(&CommutativeMap::new(identity(2)).unwrap(), 1e-9);
        assert_eq!(id.e, vec![0, 1]);
        assert_eq!(id.phi, vec![0, 1]);
        assert!(id.gamma.iter().all(|g| (*g - c64(1.0, 0.0)).norm() < 1e-12));
        assert!(id.surjective);

        let mixed = rows(&[&[1.0, 0.0], &[0.0, -1.0], &[0.5, 0.5]]);
        let cert = extract_certificate(&mixed, 1e-9);
        assert_eq!(cert.e, vec![0, 1]);
        assert_eq!(cert.gamma, vec![c64(1.0, 0.0), c64(-1.0, 0.0)]);
        assert_eq!(cert.phi, vec![0, 1]);
        assert!(cert.surjective);
        assert!(isometry_verdict(&mixed, 1e-9));
        assert!(brute_isometry(&mixed, 1e-9));

        let doubled = rows(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let cert = extract_certificate(&doubled, 1e-9);
        assert_eq!(cert.e, vec![0, 1]);
        assert_eq!(cert.phi, vec![0, 0]);
        assert!(!cert.surjective);
        assert_eq!(cert.uncovered, vec![1]);
        assert!(!isometry_verdict(&doubled, 1e-9));
        let image = doubled.apply(&[c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert!(image.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn planted_certificates_are_recovered() {
        let mut rng = seeded_rng(11);
        for trial in 0..60 {
            let k1 = rng.random_range(1..=6);
            let k2 = rng.random_range(k1..=8);
            let surjective = k1 == 1 || trial % 3 != 0;
            let lo = if surjective { k1 } else { 0 };
            let spec = SynthSpec {
                k1,
                k2,
                composition_rows: rng.random_range(lo..=k2),
                surjective,
                real: trial % 2 == 0,
            };
            let (cm, planted) = synthesize(&spec, &mut rng).unwrap();
            let found = extract_certificate(&cm, 1e-9);
            assert_eq!(found, planted);
            assert!(contractive(&cm, 1e-12));
            if spec.real {
                assert_eq!(isometry_verdict(&cm, 1e-9), brute_isometry(&cm, 1e-9));
            }
            let f: Vec<C64> = random_gaussian(1, k1, &mut rng).iter().copied().collect();
            assert!(certificate_residual(&cm, &found, &f) < 1e-12);
        }
    }

    #[test]
    fn shrinking_tol_never_grows_e() {
        let mut rng = seeded_rng(5);
        for _ in 0..40 {
            let m = random_gaussian(4, 3, &mut rng).map(|z| z * 0.6);
            let cm = CommutativeMap::new(m).unwrap();
            let mut last = usize::MAX;
            for tol in [0.45, 0.3, 0.1, 1e-3, 1e-9] {
                let size = extract_certificate(&cm, tol).e.len();
                assert!(size <= last);
                last = size;
            }
        }
    }
}
