//! JSON documents: map descriptions in, analysis reports out.
//!
//! Complex numbers are `[re, im]` pairs and matrices are arrays of rows. A
//! matrix map lists `T(E_ij)` for the domain matrix units in row-major order
//! of `(i, j)`. The schema lives in `schema/isolab.schema.json`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cbnorm::ViolationKind;
use crate::decompose::{Decomposition, FactorSide, Verdict, Witness};
use crate::error::{Error, Result};
use crate::gen::GroundTruth;
use crate::holsztynski::CommutativeMap;
use crate::linmap::MatrixMap;
use crate::matrix::{c64, ComplexMatrix, Shape};
use crate::report::Check;

pub const FORMAT_VERSION: u32 = 1;

pub const TOOL: &str = concat!("isolab ", env!("CARGO_PKG_VERSION"));

pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

pub fn encode_matrix(m: &ComplexMatrix) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Rejects ragged and empty matrices; `what` names the field in messages.
pub fn decode_matrix(doc: &MatrixDoc, what: &str) -> std::result::Result<ComplexMatrix, String> {
    let rows = doc.len();
    let cols = doc.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(format!("{what} is empty"));
    }
    if let Some((i, r)) = doc.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!("{what} row {i} has {} entries, expected {cols}", r.len()));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| c64(doc[i][j][0], doc[i][j][1])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    #[default]
    MatrixMap,
    CommutativeMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDoc {
    pub multiplicity: usize,
    pub u: MatrixDoc,
    pub v: MatrixDoc,
    pub p: MatrixDoc,
    pub q: MatrixDoc,
}

impl From<&GroundTruth> for GroundTruthDoc {
    fn from(gt: &GroundTruth) -> Self {
        GroundTruthDoc {
            multiplicity: gt.multiplicity,
            u: encode_matrix(&gt.u),
            v: encode_matrix(&gt.v),
            p: encode_matrix(&gt.p),
            q: encode_matrix(&gt.q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub version: u32,
    #[serde(default)]
    pub kind: DocumentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codomain: Option<Shape>,
    /// `T(E_ij)` in row-major order of `(i, j)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<MatrixDoc>>,
    /// Commutative maps: row `y` is `f -> T(f)(y)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthDoc>,
}

/// 1-based line and column of the first occurrence of `"key"`, or of the
/// start of the text.
fn locate(text: &str, key: &str) -> (usize, usize) {
    let Some(at) = text.find(&format!("\"{key}\"")) else {
        return (1, 1);
    };
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(at, |nl| at - nl - 1) + 1;
    (line, column)
}

fn parse_error(text: &str, key: &str, message: String) -> Error {
    let (line, column) = locate(text, key);
    Error::Parse { line, column, message }
}

impl MapDocument {
    pub fn from_map(map: &MatrixMap) -> Self {
        MapDocument {
            version: FORMAT_VERSION,
            kind: DocumentKind::MatrixMap,
            name: None,
            domain: Some(map.domain()),
            codomain: Some(map.codomain()),
            action: Some(map.action().iter().map(encode_matrix).collect()),
            matrix: None,
            expected_verdict: None,
            ground_truth: None,
        }
    }

    pub fn from_commutative(cm: &CommutativeMap) -> Self {
        MapDocument {
            version: FORMAT_VERSION,
            kind: DocumentKind::CommutativeMap,
            name: None,
            domain: None,
            codomain: None,
            action: None,
            matrix: Some(encode_matrix(cm.matrix())),
            expected_verdict: None,
            ground_truth: None,
        }
    }

    /// Parses and validates; every failure carries a line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: MapDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if doc.version != FORMAT_VERSION {
            return Err(parse_error(
                text,
                "version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", doc.version),
            ));
        }
        doc.validate().map_err(|(key, message)| parse_error(text, key, message))?;
        Ok(doc)
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        match self.kind {
            DocumentKind::MatrixMap => {
                let domain = self.domain.ok_or(("kind", "matrix_map needs a domain".to_string()))?;
                let codomain = self.codomain.ok_or(("kind", "matrix_map needs a codomain".to_string()))?;
                for (key, s) in [("domain", domain), ("codomain", codomain)] {
                    if s.rows == 0 || s.cols == 0 {
                        return Err((key, format!("{key} must be at least 1x1")));
                    }
                }
                let action = self.action.as_ref().ok_or(("kind", "matrix_map needs an action".to_string()))?;
                if action.len() != domain.dim() {
                    return Err((
                        "action",
                        format!("action has {} images, domain {}x{} needs {}", action.len(), domain.rows, domain.cols, domain.dim()),
                    ));
                }
                for (k, image) in action.iter().enumerate() {
                    let m = decode_matrix(image, &format!("action[{k}]")).map_err(|e| ("action", e))?;
                    if Shape::of(&m) != codomain {
                        return Err((
                            "action",
                            format!(
                                "action[{k}] is {}x{}, codomain is {}x{}",
                                m.nrows(),
                                m.ncols(),
                                codomain.rows,
                                codomain.cols
                            ),
                        ));
                    }
                }
            }
            DocumentKind::CommutativeMap => {
                let m = self.matrix.as_ref().ok_or(("kind", "commutative_map needs a matrix".to_string()))?;
                decode_matrix(m, "matrix").map_err(|e| ("matrix", e))?;
            }
        }
        Ok(())
    }

    pub fn to_map(&self) -> Result<MatrixMap> {
        if self.kind != DocumentKind::MatrixMap {
            return Err(Error::WrongKind("expected a matrix_map document".into()));
        }
        let (Some(domain), Some(codomain), Some(action)) = (self.domain, self.codomain, self.action.as_ref()) else {
            return Err(Error::Argument("incomplete matrix_map document".into()));
        };
        let images = action
            .iter()
            .map(|m| decode_matrix(m, "action").map_err(Error::Argument))
            .collect::<Result<Vec<_>>>()?;
        MatrixMap::new(domain, codomain, images)
    }

    pub fn to_commutative(&self) -> Result<CommutativeMap> {
        if self.kind != DocumentKind::CommutativeMap {
            return Err(Error::WrongKind("expected a commutative_map document".into()));
        }
        let m = self
            .matrix
            .as_ref()
            .ok_or_else(|| Error::Argument("commutative_map needs a matrix".into()))?;
        CommutativeMap::new(decode_matrix(m, "matrix").map_err(Error::Argument)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CertificateBlocks {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_side: Option<FactorSide>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_action: Option<Vec<MatrixDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_action: Option<Vec<MatrixDoc>>,
    /// Canonical frame: `frame_u T(x) frame_v = diag(x, …, x, S(x))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_u: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_v: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessDoc {
    Norm {
        violation: ViolationKind,
        level: usize,
        ratio: f64,
        input: MatrixDoc,
    },
    Kernel {
        input: MatrixDoc,
    },
    Envelope {
        stage: String,
        relative_residual: f64,
    },
}

impl From<&Witness> for WitnessDoc {
    fn from(w: &Witness) -> Self {
        match w {
            Witness::Norm(f) => WitnessDoc::Norm {
                violation: f.kind,
                level: f.level,
                ratio: f.ratio,
                input: encode_matrix(&f.x),
            },
            Witness::Kernel(x) => WitnessDoc::Kernel { input: encode_matrix(x) },
            Witness::Envelope(i) => WitnessDoc::Envelope {
                stage: i.stage.to_string(),
                relative_residual: i.relative_residual,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub tool: String,
    /// SHA-256 of the input bytes.
    pub input_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub verdict: Verdict,
    pub certificate: CertificateBlocks,
    pub witnesses: Vec<WitnessDoc>,
    pub residuals: Vec<Check>,
    pub level_ratios: Vec<f64>,
    pub diagnostics: Vec<String>,
    pub timing_ms: f64,
    /// SHA-256 of this report with `timing_ms` zeroed and `digest` empty.
    pub digest: String,
}

fn finite(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::MAX.copysign(x)
    }
}

impl Report {
    pub fn from_decomposition(dec: &Decomposition, input: &[u8], name: Option<String>, timing_ms: f64) -> Self {
        let maps = |m: &MatrixMap| m.action().iter().map(encode_matrix).collect::<Vec<_>>();
        let certificate = CertificateBlocks {
            p: dec.p().map(|p| encode_matrix(p.matrix())),
            q: dec.q().map(|q| encode_matrix(q.matrix())),
            u: dec.u.as_ref().map(encode_matrix),
            factor_side: dec.factor_side,
            pi_action: dec.pi.as_ref().map(maps),
            s_action: dec.s().map(maps),
            frame_u: dec.canonical.as_ref().map(|c| encode_matrix(&c.u)),
            frame_v: dec.canonical.as_ref().map(|c| encode_matrix(&c.v)),
            multiplicity: dec.canonical.as_ref().map(|c| c.multiplicity),
        };
        let residuals = dec
            .checks
            .checks
            .iter()
            .map(|c| Check {
                name: c.name.clone(),
                residual: finite(c.residual),
                threshold: finite(c.threshold),
            })
            .collect();
        let mut report = Report {
            version: FORMAT_VERSION,
            tool: TOOL.to_string(),
            input_digest: sha256_hex(input),
            name,
            verdict: dec.verdict,
            certificate,
            witnesses: dec.witnesses.iter().map(WitnessDoc::from).collect(),
            residuals,
            level_ratios: dec.level_ratios.iter().copied().map(finite).collect(),
            diagnostics: dec.diagnostics.clone(),
            timing_ms,
            digest: String::new(),
        };
        report.digest = report.content_digest();
        report
    }

    /// Digest of everything except timing.
    pub fn content_digest(&self) -> String {
        let stripped = Report {
            timing_ms: 0.0,
            digest: String::new(),
            ..self.clone()
        };
        sha256_hex(serde_json::to_string(&stripped).expect("reports serialize").as_bytes())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{analyze, AnalyzeOptions};
    use crate::matrix::{frobenius, from_real_rows, identity};

    fn m2() -> Shape {
        Shape::square(2).unwrap()
    }

    #[test]
    fn map_round_trip() {
        let map = MatrixMap::transpose(m2());
        let doc = MapDocument::from_map(&map);
        let back = MapDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_map().unwrap().max_action_distance(&map), 0.0);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let text = "{\n  \"version\": 1,\n  \"domain\": {\"rows\": 1 \"cols\": 1}\n}";
        match MapDocument::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_errors_point_at_the_field() {
        let text = "{\n  \"version\": 1,\n  \"domain\": {\"rows\": 1, \"cols\": 1},\n  \"codomain\": {\"rows\": 2, \"cols\": 2},\n  \"action\": [[[[1, 0], [0, 0]], [[0, 0]]]]\n}";
        match MapDocument::parse(text) {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (5, 3));
                assert!(message.contains("row 1"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        let wrong_count = text.replace("\"rows\": 1, \"cols\": 1", "\"rows\": 1, \"cols\": 2");
        assert!(matches!(MapDocument::parse(&wrong_count), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn kinds_are_enforced() {
        let cm = CommutativeMap::new(from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap();
        let doc = MapDocument::parse(&MapDocument::from_commutative(&cm).to_json()).unwrap();
        assert_eq!(doc.to_commutative().unwrap(), cm);
        assert!(matches!(doc.to_map(), Err(Error::WrongKind(_))));
        let map_doc = MapDocument::from_map(&MatrixMap::identity(m2()));
        assert!(matches!(map_doc.to_commutative(), Err(Error::WrongKind(_))));
    }

    #[test]
    fn report_round_trip_and_digest() {
        let map = MatrixMap::identity(m2());
        let input = MapDocument::from_map(&map).to_json();
        let dec = analyze(&map, &AnalyzeOptions::default());
        let a = Report::from_decomposition(&dec, input.as_bytes(), None, 3.0);
        let b = Report::from_decomposition(&dec, input.as_bytes(), None, 7.0);
        assert_eq!(a.digest, b.digest);
        assert_eq!(Report::parse(&a.to_json()).unwrap(), a);
        let p = decode_matrix(a.certificate.p.as_ref().unwrap(), "p").unwrap();
        assert!(frobenius(&p) < 1e-12);
        assert!(frobenius(&(decode_matrix(&encode_matrix(&identity(2)), "i").unwrap() - identity(2))) == 0.0);
    }
}
