//! Fixtures shared by the benchmarks.

use isolab::gen::{random_complete_isometry, GenSpec};
use isolab::MatrixMap;

/// Generated complete isometry `M_{m,n} -> M_{r,s}` with a nonzero
/// contraction block, so every stage of the pipeline does real work.
pub fn instance(domain: (usize, usize), codomain: (usize, usize), multiplicity: usize) -> MatrixMap {
    let spec = GenSpec::new(domain, codomain, multiplicity, 0.5, 7).expect("valid spec");
    random_complete_isometry(&spec).expect("generator").0
}
