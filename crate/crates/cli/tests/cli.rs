use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qcmean(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcmean")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const EXP: &str = r#"{
  "dim": 2,
  "gauge": {"family": "exp"},
  "field": {"kind": "constant", "c": 1},
  "params": {"delta": 0.5, "mass": 10, "x0": [0, 0]},
  "sweep": {"epsilon": [0.1, 0.25, 0.5, 0.9], "x": [[0.3, 0], [0.001, 0], [0.1, 0.1]]}
}"#;

#[test]
fn gauge_check_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.json", EXP);
    write(dir.path(), "pow.json", r#"{"dim": 2, "gauge": {"family": "power", "alpha": 2}}"#);
    write(dir.path(), "pow3.json", r#"{"dim": 3, "gauge": {"family": "power", "alpha": 2}}"#);
    let v = stdout_json(&qcmean(dir.path(), &["gauge-check", "--config", "exp.json"]));
    assert_eq!(v["result"]["overall"], "equicontinuous");
    assert_eq!(v["command"], "gauge-check");
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    assert!(v["tolerances"]["quad"]["rel_tol"].is_number());
    let v = stdout_json(&qcmean(dir.path(), &["gauge-check", "--config", "pow.json"]));
    assert_eq!(v["result"]["overall"], "not_equicontinuous");
    assert!(v["result"]["certificates"]["inverse_bound_holds"].as_bool().unwrap());
    let v = stdout_json(&qcmean(dir.path(), &["gauge-check", "--config", "pow3.json"]));
    let rows = v["result"]["rows"].as_array().unwrap();
    // six equivalent conditions and the root condition at p = 1 and p = 2, plus one more at p = 2
    assert_eq!(rows.len(), 15);
    assert!(v["result"]["consistent"].as_array().unwrap().iter().all(|c| c[1] == true));
}

#[test]
fn bound_table_is_monotone_and_echoes_alpha() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.json", EXP);
    let v = stdout_json(&qcmean(dir.path(), &["bound", "--config", "exp.json", "--alpha-n", "2.5"]));
    assert_eq!(v["inputs"]["alpha_n"], 2.5);
    assert_eq!(v["result"]["monotone"], true);
    let rows = v["result"]["rows"].as_array().unwrap();
    // emitted in config order
    let xs: Vec<f64> = rows.iter().map(|r| r["x"][0].as_f64().unwrap()).collect();
    assert_eq!(xs, [0.3, 0.001, 0.1]);
    let v1 = stdout_json(&qcmean(dir.path(), &["bound", "--config", "exp.json", "--alpha-n", "1"]));
    let a = rows[1]["bound"]["raw"].as_f64().unwrap();
    let b = v1["result"]["rows"][1]["bound"]["raw"].as_f64().unwrap();
    assert_eq!(a, 2.5 * b);
}

#[test]
fn lemma31_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.json", EXP);
    let out = qcmean(dir.path(), &["lemma31", "--config", "exp.json", "--format", "csv", "--out", "res"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("res/lemma31.csv")).unwrap();
    let mut body = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(body.next(), Some("epsilon,lhs,rhs,verdict"));
    let rows: Vec<Vec<&str>> = body.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[3] == "true"));
    // ε ≥ e^{-1/2} leaves an empty range
    assert_eq!(rows[3][2], "0");
    assert!(text.contains("# config_sha256="));
}

#[test]
fn lemma31_row_errors_keep_going() {
    let dir = tempfile::tempdir().unwrap();
    // e^{r^-40} overflows on the ring 0.01 < r < 1 but not on 0.9 < r < 1
    write(
        dir.path(),
        "heavy.json",
        r#"{"dim": 2, "gauge": {"family": "exp"}, "field": {"kind": "radial", "profile": "r^-40"},
            "sweep": {"epsilon": [0.01, 0.5, 0.9]}}"#,
    );
    let out = qcmean(dir.path(), &["lemma31", "--config", "heavy.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "partial");
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["error"].is_string());
    assert_eq!(rows[0]["flagged"], true);
    assert_eq!(rows[2]["verdict"], true);
}

#[test]
fn extremal_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "id.json", r#"{"dim": 2, "gauge": {"family": "identity"}, "sweep": {"m": [10, 100]}}"#);
    let v = stdout_json(&qcmean(dir.path(), &["extremal", "--config", "id.json"]));
    let r = &v["result"];
    assert!((r["i0"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(r["profile"].as_array().unwrap().len(), 200);
    for row in r["mass"].as_array().unwrap() {
        assert!(row["mass"].as_f64().unwrap() <= row["bound"].as_f64().unwrap() * (1.0 + 1e-9));
    }
    for w in r["witness"].as_array().unwrap() {
        assert!(w["min_abs_f"].as_f64().unwrap() >= 1.0);
    }
    assert_eq!(r["membership"]["ok"], true);

    let out = qcmean(dir.path(), &["extremal", "--config", "id.json", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "r,K,K_m,I,R,R_m"));

    let out = qcmean(dir.path(), &["extremal", "--config", "id.json", "--format", "svg", "--out", "."]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(dir.path().join("extremal.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    // six circles and twelve rays
    assert_eq!(svg.matches("<polyline").count(), 18);
}

#[test]
fn numerical_failure_writes_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.json", r#"{"dim": 2, "gauge": {"family": "exp"}}"#);
    let out = qcmean(dir.path(), &["extremal", "--config", "e.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/extremal.json")).unwrap()).unwrap();
    assert_eq!(v["status"], "partial");
    assert!(v["result"]["error"].as_str().unwrap().contains("tail"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "exp.json", EXP);
    write(d, "bad.json", "{\"dim\": 2,\n \"gauge\": {\"family\": \"exp\"},\n \"colour\": 1}");
    write(d, "const.json", r#"{"dim": 2, "gauge": {"family": "constant", "c": 3}}"#);
    write(d, "nox.json", r#"{"dim": 2, "gauge": {"family": "exp"}, "params": {"delta": 0.5, "mass": 1}}"#);
    write(
        d,
        "unsorted.json",
        r#"{"dim": 2, "gauge": {"family": "exp"}, "field": {"kind": "constant", "c": 1},
            "sweep": {"epsilon": [0.5, 0.1]}}"#,
    );
    write(
        d,
        "far.json",
        r#"{"dim": 2, "gauge": {"family": "exp"}, "params": {"delta": 0.5, "mass": 10},
            "sweep": {"x": [[0.6, 0]]}}"#,
    );
    write(d, "slow.json", r#"{"dim": 2, "gauge": {"family": "power", "alpha": 0.5}}"#);
    let cases: [(&[&str], &str); 9] = [
        (&["bound"], "--config"),
        (&["bound", "--config", "missing.json"], "cannot read"),
        (&["gauge-check", "--config", "bad.json"], "line 3"),
        (&["gauge-check", "--config", "const.json"], "cannot be constant"),
        (&["bound", "--config", "nox.json"], "sweep.x is empty"),
        (&["lemma31", "--config", "unsorted.json"], "increasing"),
        (&["bound", "--config", "far.json"], "ρ/2"),
        (&["bound", "--config", "exp.json", "--format", "svg"], "svg"),
        (&["extremal", "--config", "slow.json"], "growth condition"),
    ];
    for (args, needle) in cases {
        let out = qcmean(d, args);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {err}");
        assert!(err.contains(needle), "{args:?}: {err}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_qcmean"))
        .args(["gauge-check", "--config", "exp.json"])
        .env("QCMEAN_MAX_REFINE", "lots")
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn refine_cap_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.json", EXP);
    let out = Command::new(env!("CARGO_BIN_EXE_qcmean"))
        .args(["lemma31", "--config", "exp.json"])
        .env("QCMEAN_MAX_REFINE", "7")
        .current_dir(dir.path())
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["tolerances"]["quad"]["max_subdivisions"], 7);
}
