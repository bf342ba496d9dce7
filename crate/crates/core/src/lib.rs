//! Detecting complete isometries between matrix spaces.
//!
//! The pipeline builds the triple envelope of a linear map, extracts its
//! support projections, factors the reduced map through a triple morphism,
//! and certifies complete contractivity with a semidefinite feasibility
//! problem or refutes it with an explicit witness.

pub mod algebra;
pub mod cbnorm;
pub mod decompose;
pub mod document;
pub mod envelope;
pub mod error;
pub mod gen;
pub mod holsztynski;
pub mod linmap;
pub mod matrix;
pub mod nicex;
pub mod report;

pub use decompose::{analyze, AnalyzeOptions, Decomposition, Verdict};
pub use document::{MapDocument, Report};
pub use error::{Error, Result};
pub use linmap::{amplify, MatrixMap};
pub use matrix::{ComplexMatrix, Shape, C64, DEFAULT_TOL};
pub use report::{Check, CheckReport};
