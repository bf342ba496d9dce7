use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn isolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isolab"))
        .args(args)
        .env_remove("ISOLAB_TOL")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn machine(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--format", "machine"];
    full.extend_from_slice(args);
    let out = isolab(&full);
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    (code(&out), serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{e}: {stdout}")))
}

fn all_zero(m: &Value) -> bool {
    m.as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|z| {
        z.as_array().unwrap().iter().all(|x| x.as_f64().unwrap().abs() < 1e-9)
    })
}

#[test]
fn generated_corpus_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs");
    let reports = dir.path().join("reports");
    let out = isolab(&["--seed", "5", "gen", "--count", "200", "--dir", path(&docs)]);
    assert_eq!(code(&out), 0);
    let out = isolab(&["--out", path(&reports), "analyze", "--dir", path(&docs)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let written = std::fs::read_dir(&reports).unwrap().count();
    assert_eq!(written, 200);
}

#[test]
fn bundled_corpus_matches_expected_verdicts() {
    let out = isolab(&["analyze", "--dir", path(&corpus("maps"))]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(!stdout.contains("expected"));
}

#[test]
fn each_bundled_document_exits_with_its_verdict() {
    for entry in std::fs::read_dir(corpus("maps")).unwrap() {
        let p = entry.unwrap().path();
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let want = match doc["expected_verdict"].as_str().unwrap() {
            "complete_isometry" => 0,
            "not_complete_isometry" => 1,
            other => panic!("{other}"),
        };
        assert_eq!(code(&isolab(&["analyze", path(&p)])), want, "{}", p.display());
    }
}

#[test]
fn identity_document_has_zero_kernel_support() {
    let (status, report) = machine(&["analyze", path(&corpus("maps/identity.json"))]);
    assert_eq!(status, 0);
    assert_eq!(report["verdict"], "complete_isometry");
    assert!(all_zero(&report["certificate"]["p"]));
    assert!(report["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn half_scaling_document_carries_a_witness() {
    let (status, report) = machine(&["analyze", path(&corpus("maps/half-scaling.json"))]);
    assert_eq!(status, 1);
    let w = &report["witnesses"][0];
    assert_eq!(w["kind"], "norm");
    assert_eq!(w["violation"], "contraction");
    assert!((w["ratio"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let out = isolab(&["--seed", "9", "--out", path(p), "gen", "--domain", "2x3", "--codomain", "5x7", "--multiplicity", "2"]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (c, d) = (dir.path().join("c"), dir.path().join("d"));
    for p in [&c, &d] {
        assert_eq!(code(&isolab(&["--seed", "3", "gen", "--count", "5", "--dir", path(p)])), 0);
    }
    for i in 0..5 {
        let name = format!("{i:04}.json");
        assert_eq!(std::fs::read(c.join(&name)).unwrap(), std::fs::read(d.join(&name)).unwrap());
    }
}

#[test]
fn identity_frame_generates_the_corner_embedding() {
    let (status, doc) = machine(&["gen", "--kind", "corner", "--domain", "2x1", "--codomain", "3x2"]);
    assert_eq!(status, 0);
    let action = doc["action"].as_array().unwrap();
    for (k, image) in action.iter().enumerate() {
        for (r, row) in image.as_array().unwrap().iter().enumerate() {
            for (c, z) in row.as_array().unwrap().iter().enumerate() {
                let want = if (r, c) == (k, 0) { 1.0 } else { 0.0 };
                assert_eq!(z, &serde_json::json!([want, 0.0]), "image {k} at ({r}, {c})");
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("corner.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    assert_eq!(code(&isolab(&["analyze", path(&p)])), 0);
}

#[test]
fn report_digests_are_stable() {
    let p = corpus("maps/ci-0003.json");
    let (_, a) = machine(&["--seed", "4", "analyze", path(&p)]);
    let (_, b) = machine(&["--seed", "4", "analyze", path(&p)]);
    assert_eq!(a["digest"], b["digest"]);
    assert_eq!(a["input_digest"], b["input_digest"]);
    assert_eq!(a["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn parse_failures_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\n  \"version\": 1,\n  \"domain\": {\"rows\": 2, \"cols\": 2},\n  \"codomain\": oops\n}\n").unwrap();
    let out = isolab(&["analyze", path(&p)]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("4:"), "{}", String::from_utf8_lossy(&out.stderr));

    // Ragged action: well-formed JSON, wrong dimensions.
    std::fs::write(
        &p,
        "{\n  \"version\": 1,\n  \"domain\": {\"rows\": 1, \"cols\": 1},\n  \"codomain\": {\"rows\": 1, \"cols\": 2},\n  \"action\": [[[[1, 0]]]]\n}\n",
    )
    .unwrap();
    let out = isolab(&["analyze", path(&p)]);
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("5:"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(code(&isolab(&["analyze", "--bogus"])), 64);
    assert_eq!(code(&isolab(&["gen", "--domain", "3x3", "--codomain", "2x2"])), 64);
    assert_eq!(code(&isolab(&["--tol", "2", "nicex"])), 64);
    assert_eq!(code(&isolab(&["analyze", "/nonexistent/map.json"])), 74);
}

#[test]
fn wrong_document_kind_exits_65() {
    assert_eq!(code(&isolab(&["holsztynski", path(&corpus("maps/identity.json"))])), 65);
    assert_eq!(code(&isolab(&["analyze", path(&corpus("commutative/identity-l3.json"))])), 65);
}

#[test]
fn holsztynski_documents() {
    let (status, cert) = machine(&["holsztynski", path(&corpus("commutative/identity-l3.json"))]);
    assert_eq!(status, 0);
    assert_eq!(cert["e"], serde_json::json!([0, 1, 2]));
    assert_eq!(cert["phi"], serde_json::json!([0, 1, 2]));

    let (status, cert) = machine(&["holsztynski", path(&corpus("commutative/signed-2-to-3.json"))]);
    assert_eq!(status, 0);
    assert_eq!(cert["e"], serde_json::json!([0, 1]));
    assert_eq!(cert["gamma"], serde_json::json!([[1.0, 0.0], [-1.0, 0.0]]));

    let (status, cert) = machine(&["holsztynski", path(&corpus("commutative/non-surjective.json"))]);
    assert_eq!(status, 1);
    assert_eq!(cert["surjective"], false);
    assert_eq!(cert["uncovered"], serde_json::json!([1]));
}

#[test]
fn nicex_defaults_and_control() {
    let (status, r) = machine(&["nicex"]);
    assert_eq!(status, 0);
    assert_eq!(r["enumeration"]["surviving"], 1);
    assert_eq!(r["enumeration"]["only_zero_map"], true);
    assert_eq!(r["commutant"]["diagonal"], true);

    let (status, r) = machine(&["nicex", "--control"]);
    assert_eq!(status, 0);
    assert!(r["enumeration"]["surviving"].as_u64().unwrap() > 1);

    let (status, r) = machine(&["nicex", "--n", "2", "--levels", "2"]);
    assert_eq!(status, 0);
    assert_eq!(r["enumeration"]["surviving"], 1);
    assert_eq!(r["enumeration"]["masks_tried"], 16);
}

#[test]
fn nicex_refuses_large_enumerations() {
    let out = isolab(&["nicex", "--n", "5", "--levels", "5"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("not enumerated"));
}

#[test]
fn tolerance_flag_beats_environment() {
    let p = corpus("maps/identity.json");
    let with_env = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_isolab"))
            .args(args)
            .env("ISOLAB_TOL", "5")
            .output()
            .unwrap()
    };
    // An out-of-range environment value is used when no flag is given...
    assert_eq!(code(&with_env(&["analyze", path(&p)])), 64);
    // ...and ignored once the flag is present.
    assert_eq!(code(&with_env(&["--tol", "1e-8", "analyze", path(&p)])), 0);
}
