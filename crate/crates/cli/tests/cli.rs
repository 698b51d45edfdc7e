use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sabasis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sabasis"))
        .args(args)
        .output()
        .expect("spawn sabasis")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn build(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["build", "--out", path_str(&out)];
    args.extend_from_slice(extra);
    let res = sabasis(&args);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn build_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let basis = build(dir.path(), "b.json", &["--stages", "10"]);
    let res = sabasis(&["verify", path_str(&basis)]);
    assert_eq!(res.status.code(), Some(0));
    let report = json(&res);
    assert_eq!(report["passed"], true);
    assert_eq!(report["model"], "abelian");
    assert!(report["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["status"] != "fail"));

    let show = sabasis(&["show", path_str(&basis)]);
    assert_eq!(show.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&show.stdout).contains("stages     10"));
    let member = sabasis(&["show", path_str(&basis), "--member", "1"]);
    assert!(String::from_utf8_lossy(&member.stdout).contains("[0, 1/2)"));
}

#[test]
fn builds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = build(dir.path(), "a.json", &["--stages", "12"]);
    let b = build(dir.path(), "b.json", &["--stages", "12"]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let ma = build(dir.path(), "ma.json", &["--model", "matrix", "--n", "2", "--stages", "4"]);
    let mb = build(dir.path(), "mb.json", &["--model", "matrix", "--n", "2", "--stages", "4"]);
    assert_eq!(std::fs::read(ma).unwrap(), std::fs::read(mb).unwrap());
}

#[test]
fn tampered_value_fails_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let basis = build(dir.path(), "b.json", &["--stages", "10"]);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&basis).unwrap()).unwrap();
    doc["family"][1]["values"][1] = Value::from("2/1");
    std::fs::write(&basis, serde_json::to_string(&doc).unwrap()).unwrap();
    let res = sabasis(&["verify", path_str(&basis)]);
    assert_eq!(res.status.code(), Some(1));
    let report = json(&res);
    assert_eq!(report["passed"], false);
    let text = report.to_string();
    assert!(text.contains("member 1, cell 1"), "{text}");
}

#[test]
fn matrix_basis_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let basis = build(dir.path(), "m.json", &["--model", "matrix", "--n", "2", "--stages", "6"]);
    let res = sabasis(&["verify", path_str(&basis), "--jobs", "2"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    assert_eq!(json(&res)["model"], "matrix");
}

#[test]
fn verify_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let res = sabasis(&["verify", path_str(&missing)]);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(json(&res)["error"]["kind"], "io");

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let res = sabasis(&["verify", path_str(&broken)]);
    assert_eq!(res.status.code(), Some(4));
    assert_eq!(json(&res)["error"]["kind"], "parse");

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"model": "other"}"#).unwrap();
    assert_eq!(sabasis(&["verify", path_str(&unknown)]).status.code(), Some(4));
}

#[test]
fn exit_codes() {
    assert_eq!(sabasis(&["--help"]).status.code(), Some(0));
    assert_eq!(sabasis(&["no-such-command"]).status.code(), Some(4));
    assert_eq!(sabasis(&["bound", "x", "1", "1"]).status.code(), Some(4));
    assert_eq!(sabasis(&["bound", "1", "1", "0"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let res = sabasis(&["build", "--model", "matrix", "--n", "9", "--stages", "1", "--out", path_str(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let res = sabasis(&["build", "--stages", "3", "--out", path_str(&dir.path().join("no/such/dir.json"))]);
    assert_eq!(res.status.code(), Some(3));
    let res = sabasis(&["pursue", "rademacher:1", "--epsilon", "1/2", "--tol-alg", "-1"]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn bound_prints_the_iteration_bound() {
    let res = sabasis(&["bound", "1", "1", "1/2"]);
    assert_eq!(res.status.code(), Some(0));
    let v = json(&res);
    assert_eq!(v["minimal"], 31_032_101);
    assert_eq!(v["bound"], 34_135_312);
}

#[test]
fn pursue_recovers_a_rademacher_function() {
    let res = sabasis(&["pursue", "rademacher:2", "--epsilon", "1/2"]);
    assert_eq!(res.status.code(), Some(0));
    let v = json(&res);
    assert_eq!(v["passed"], true);
    let its = v["iterations"].as_array().unwrap();
    assert_eq!(its.len(), 1);
    assert_eq!(its[0]["alpha"], "1");
}

#[test]
fn pursue_writes_trace_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let csv = dir.path().join("decay.csv");
    let res = sabasis(&[
        "pursue",
        "step:0,1/3,1:1,-1/2",
        "--epsilon",
        "0.125",
        "--out",
        path_str(&trace),
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("k,alpha,norm2_sq,norm_inf"));
    let rows = v["iterations"].as_array().unwrap().len();
    assert_eq!(table.lines().count(), rows + 2);
}

#[test]
fn pursue_against_a_basis_file() {
    let dir = tempfile::tempdir().unwrap();
    let basis = build(dir.path(), "b.json", &["--stages", "6"]);
    let res = sabasis(&["pursue", "dense:3", "--epsilon", "1/4", "--family", path_str(&basis)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json(&res)["passed"], true);
}

#[test]
fn matrix_pursuit_runs() {
    let res = sabasis(&["pursue", "random", "--model", "matrix", "--n", "3", "--seed", "5", "--epsilon", "0.25"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let v = json(&res);
    assert_eq!(v["passed"], true);
    assert_eq!(v["n"], 3);
}
