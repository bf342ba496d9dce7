//! Human-readable output.

use std::fmt::Write as _;

use isolab::document::{decode_matrix, Report, WitnessDoc};
use isolab::holsztynski::{CommutativeMap, HolsztynskiCertificate};
use isolab::matrix::rank;
use isolab::nicex::{CommutantReport, LowerBoundReport, ProjectionReport};

fn projection_rank(doc: &Option<isolab::document::MatrixDoc>) -> Option<usize> {
    let m = decode_matrix(doc.as_ref()?, "projection").ok()?;
    Some(rank(&m, 1e-6))
}

pub fn report(r: &Report) -> String {
    let mut s = String::new();
    if let Some(name) = &r.name {
        let _ = writeln!(s, "map        {name}");
    }
    let _ = writeln!(s, "verdict    {}", r.verdict);
    let _ = writeln!(s, "input      sha256:{}", r.input_digest);
    let c = &r.certificate;
    if let (Some(p), Some(q)) = (projection_rank(&c.p), projection_rank(&c.q)) {
        let _ = writeln!(s, "supports   rank p = {p}, rank q = {q}");
    }
    if let Some(k) = c.multiplicity {
        let _ = writeln!(s, "frame      multiplicity {k}");
    }
    for w in &r.witnesses {
        match w {
            WitnessDoc::Norm { violation, level, ratio, .. } => {
                let kind = serde_json::to_value(violation).expect("enum");
                let _ = writeln!(s, "witness    {} at level {level}: norm ratio {ratio:.9}", kind.as_str().unwrap_or("?"));
            }
            WitnessDoc::Kernel { .. } => {
                let _ = writeln!(s, "witness    nonzero input mapped to zero");
            }
            WitnessDoc::Envelope { stage, relative_residual } => {
                let _ = writeln!(s, "witness    inconsistent triple word ({stage}), residual {relative_residual:.3e}");
            }
        }
    }
    if !r.level_ratios.is_empty() {
        let ratios: Vec<String> = r.level_ratios.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(s, "levels     max ratio {}", ratios.join(" "));
    }
    let failed: Vec<_> = r.residuals.iter().filter(|c| !c.passed()).collect();
    let _ = writeln!(s, "checks     {} passed, {} failed", r.residuals.len() - failed.len(), failed.len());
    for c in failed {
        let _ = writeln!(s, "  failed   {}: {:.3e} > {:.1e}", c.name, c.residual, c.threshold);
    }
    for d in &r.diagnostics {
        let _ = writeln!(s, "note       {d}");
    }
    let _ = writeln!(s, "time       {:.1} ms", r.timing_ms);
    s
}

pub fn holsztynski(cm: &CommutativeMap, cert: &HolsztynskiCertificate, contractive: bool, isometry: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "map        l∞_{} -> l∞_{}", cm.k1(), cm.k2());
    let _ = writeln!(s, "contractive {contractive}");
    let _ = writeln!(s, "E          {:?}", cert.e);
    let gamma: Vec<String> = cert.gamma.iter().map(|g| format!("{:.6}{:+.6}i", g.re, g.im)).collect();
    let _ = writeln!(s, "gamma      [{}]", gamma.join(", "));
    let _ = writeln!(s, "phi        {:?}", cert.phi);
    let _ = writeln!(s, "surjective {}", cert.surjective);
    if !cert.uncovered.is_empty() {
        let _ = writeln!(s, "uncovered  {:?}", cert.uncovered);
    }
    let _ = writeln!(s, "isometry   {isometry}");
    s
}

pub fn nicex(
    control: bool,
    bounds: &LowerBoundReport,
    commutant: &CommutantReport,
    enumeration: Option<&ProjectionReport>,
) -> String {
    let mut s = String::new();
    if control {
        let _ = writeln!(s, "map        control x -> diag(x, x)");
    } else {
        let _ = writeln!(
            s,
            "bounds     {} samples, {} level violations, {} sup violations, {} contraction violations",
            bounds.samples, bounds.level_violations, bounds.sup_violations, bounds.contraction_violations
        );
    }
    let _ = writeln!(
        s,
        "commutant  dimension {} of {}, diagonal {}",
        commutant.dimension, commutant.size, commutant.diagonal
    );
    match enumeration {
        Some(e) => {
            let _ = writeln!(s, "masks      {}", e.masks_tried);
            let _ = writeln!(s, "surviving  {}", e.survivors.len());
            let _ = writeln!(s, "zero map   {}", e.only_zero_map());
        }
        None => {
            let _ = writeln!(s, "surviving  not enumerated");
        }
    }
    s
}
