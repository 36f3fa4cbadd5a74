use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pathfield(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathfield"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("PATHFIELD_THREADS", "0")
        .output()
        .expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

#[test]
fn grad_anomaly_at_zero_and_plain_zero_elsewhere() {
    let dir = tempfile::tempdir().unwrap();
    let at0 = pathfield(dir.path(), &["grad", "--fn", "paperf.fn", "--at", "0", "--policy", "default"]);
    assert_eq!(code(&at0), 0);
    assert_eq!(json(&at0)["gradient"], serde_json::json!(["1"]));
    let at7 = pathfield(dir.path(), &["grad", "--fn", "paperf.fn", "--at", "7"]);
    assert_eq!(json(&at7)["gradient"], serde_json::json!(["0"]));
    let neg = pathfield(dir.path(), &["grad", "--fn", "paperf", "--at", "-1e-9", "--mode", "reverse"]);
    assert_eq!(json(&neg)["gradient"], serde_json::json!(["0"]));
}

#[test]
fn grad_of_affine_is_its_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["grad", "--fn", "affine.fn", "--at", "1,2"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["gradient"], serde_json::json!(["2", "-3"]));
    assert_eq!(v["value"], "-3");
}

#[test]
fn grad_accepts_a_function_file_and_policy_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("g.fn");
    std::fs::write(&f, "dim 1;\nrelu(x0)\n").unwrap();
    let p = dir.path().join("p.json");
    std::fs::write(&p, r#"{"relu_at_zero": "1/2"}"#).unwrap();
    let o = pathfield(dir.path(), &["grad", "--fn", f.to_str().unwrap(), "--at", "0", "--policy", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["gradient"], serde_json::json!(["1/2"]));
}

#[test]
fn clarke_of_abs_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["clarke", "--fn", "abs1d.fn", "--at", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["vertices"], serde_json::json!([["-1"], ["1"]]));
    assert!(dir.path().join("clarke.json").is_file());
}

#[test]
fn stratify_lists_three_strata_for_the_anomaly_function() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["stratify", "--fn", "paperf.fn"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["stratification"]["strata"].as_array().unwrap().len(), 3);
    assert_eq!(v["whitney_failures"], 0);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("stratification.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn verify_policy_field_passes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["verify", "--fn", "paperf.fn", "--field", "policy", "--suite", "all", "--seed", "7", "--curves", "200"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v = json(&o);
    for suite in ["chain", "structure", "regularity"] {
        assert_eq!(v[suite]["verdict"], "PASS", "{suite}");
    }
    assert!(dir.path().join("verify-report.json").is_file());
    let csv = std::fs::read_to_string(dir.path().join("verify-summary.csv")).unwrap();
    // header, 200 random curves, one dwell curve at the origin
    assert_eq!(csv.lines().count(), 1 + 200 + 1);
}

#[test]
fn verify_zero_field_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["verify", "--fn", "abs1d.fn", "--field", "zero", "--suite", "chain", "--curves", "100"]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["verdict"], "FAIL");
    assert!(v["chain"]["failed"].as_u64().unwrap() > 50);
}

#[test]
fn verify_truncated_normal_sum_on_cross2d() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["verify", "--fn", "cross2d.fn", "--field", "clarke+normal", "--r", "2", "--curves", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["radius"], "2");
}

#[test]
fn verify_zero_field_structure_reports_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["verify", "--fn", "l1-2d", "--field", "zero", "--suite", "structure", "--points", "10"]);
    assert_eq!(code(&o), 1);
    let certs = json(&o)["structure"]["certificates"].as_array().unwrap().clone();
    assert!(!certs.is_empty());
    assert_eq!(certs[0]["certificate"]["kind"], "separated");
}

#[test]
fn descend_writes_trajectory_with_gap_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["descend", "--fn", "l1-2d.fn", "--from", "1,1", "--steps", "200"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["steps"], 200);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,x0,x1,f,g_norm,gap");
    assert_eq!(lines.len(), 1 + 200 + 1);
    assert!(lines.last().unwrap().starts_with("200,-1.2560524697699389e-5,"));
    let with_gap = lines[1..].iter().filter(|l| !l.ends_with(',')).count();
    assert_eq!(with_gap, 20 + 1);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify", "--fn", "max2d", "--field", "clarke+normal", "--r", "1", "--curves", "40", "--seed", "3"];
    let oa = pathfield(a.path(), &args);
    let ob = pathfield(b.path(), &args);
    assert_eq!(oa.stdout, ob.stdout);
    for name in ["verify-report.json", "verify-summary.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let da = pathfield(a.path(), &["descend", "--fn", "max2d", "--from", "1,1/3", "--field", "policy", "--seed", "5"]);
    let db = pathfield(b.path(), &["descend", "--fn", "max2d", "--from", "1,1/3", "--field", "policy", "--seed", "5"]);
    assert_eq!(da.stdout, db.stdout);
    assert_eq!(std::fs::read(a.path().join("descent.json")).unwrap(), std::fs::read(b.path().join("descent.json")).unwrap());
}

#[test]
fn seeds_change_reports() {
    let a = tempfile::tempdir().unwrap();
    let args = |s: &'static str| ["verify", "--fn", "abs1d", "--suite", "chain", "--curves", "5", "--seed", s];
    pathfield(a.path(), &args("1"));
    let first = std::fs::read(a.path().join("verify-summary.csv")).unwrap();
    pathfield(a.path(), &args("2"));
    assert_ne!(first, std::fs::read(a.path().join("verify-summary.csv")).unwrap());
}

#[test]
fn usage_and_guard_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["grad", "--fn", "no-such-function", "--at", "0"],
        &["grad", "--fn", "paperf", "--at", "1,2"],
        &["grad", "--fn", "paperf", "--at", "x"],
        &["verify", "--fn", "abs1d", "--field", "clarke", "--r", "1"],
        &["verify", "--fn", "abs1d", "--field", "clarke+normal", "--r", "0"],
        &["verify", "--fn", "abs1d", "--tol-abs", "0"],
        &["descend", "--fn", "abs1d", "--from", "1", "--steps", "0"],
        &["descend", "--fn", "abs1d", "--from", "1", "--alpha0", "-1"],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(code(&pathfield(dir.path(), args)), 2, "{args:?}");
    }
    let bad = dir.path().join("bad.fn");
    std::fs::write(&bad, "abs(x0 +").unwrap();
    let o = pathfield(dir.path(), &["stratify", "--fn", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
}

#[test]
fn dimension_guard_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("big.fn");
    std::fs::write(&f, "dim 5;\nabs(x0) + abs(x4)\n").unwrap();
    assert_eq!(code(&pathfield(dir.path(), &["stratify", "--fn", f.to_str().unwrap()])), 2);
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathfield(dir.path(), &["verify", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["[default: 1000]", "[default: 1e-8]", "[default: 4]", "[default: 100]", "[default: 2]", "[default: 0]", "[default: pathfield-out]"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    let top = pathfield(dir.path(), &["--help"]);
    let text = String::from_utf8_lossy(&top.stdout);
    for sub in ["grad", "clarke", "stratify", "verify", "descend"] {
        assert!(text.contains(sub));
    }
}
