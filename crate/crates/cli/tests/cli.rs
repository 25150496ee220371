#![allow(clippy::excessive_precision)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SCALAR: &str = r#"{"model": {"scalar": {"a": -1, "b": 0.5, "sigma": 0.2, "rho": 0, "q": 0.5}},
    "sim": {"h": 0.01, "T": 120, "n_paths": 300, "master_seed": 42}}"#;

/// Reference value of `x(100)` for `x' = -2x + x(t/2)`, `x(0) = 1`, from its power series.
const DET_GOLDEN: f64 = 0.007_177_545_430_228_505_7;

fn panto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panto")).args(args).env_remove("PANTO_SEED").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn classify_scalar_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let o = panto(&["classify", "--config", &cfg, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["alpha_mean"], -1.0);
    assert_eq!(v["stable_mean"], true);
    assert_eq!(v["source"], "Thm3.1(i)");
}

#[test]
fn classify_table_lists_source() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let o = panto(&["classify", "--config", &cfg, "--format", "table", "--analysis.p=2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("Thm3.1(ii)"), "{text}");
}

#[test]
fn classify_matrix_corollary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"matrix": {"A": [[-1, 0], [0, -2]], "B": [[0, 0], [0, 0]],
            "Sigma": [[0.1, 0], [0, 0.1]], "Theta": [[0, 0], [0, 0]], "q": 0.5}},
            "analysis": {"matrix_mode": "corollary"}}"#,
    );
    let out = dir.path().join("out");
    let o = panto(&["classify", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["bounded"], true);
    assert_eq!(v["lyapunov"]["gamma_hi2"], 0.5);
    assert!(out.join("classify.json").exists() && out.join("manifest.json").exists());
}

#[test]
fn zero_drift_is_a_regime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let o = panto(&["classify", "--config", &cfg, "--model.scalar.a=0", "--format", "json"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Lemma2.2(iii)"));
    let o = panto(&["verify", "--config", &cfg, "--model.scalar.a=0", "--out", dir.path().join("v").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_tolerance_fails_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let out = dir.path().join("out");
    let o = panto(&[
        "verify",
        "--config",
        &cfg,
        "--analysis.tolerances={\"polynomial_mean\":0,\"polynomial_as\":0,\"exponential_mean\":0,\"exponential_as\":0,\"coherence\":0}",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&std::fs::read(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn verify_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let out = dir.path().join("out");
    let o = panto(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "moments.csv", "exponents.json", "verdict.json", "plot.gp"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(csv.starts_with("t,m_hat,stderr,n_used\r\n"));
    assert_eq!(csv.lines().count(), 33);
    let plot = std::fs::read_to_string(out.join("plot.gp")).unwrap();
    assert!(plot.contains("moments.csv") && plot.contains("alpha = -1"));
}

#[test]
fn missing_config_is_a_config_error() {
    assert_eq!(panto(&["verify", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(panto(&["verify"]).status.code(), Some(2));
    assert_eq!(panto(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(panto(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    assert_eq!(panto(&["classify", "--config", &cfg, "--model.scalar.q=1.5"]).status.code(), Some(2));
    assert_eq!(panto(&["verify", "--config", &cfg, "--sim.h=1.0"]).status.code(), Some(2));
}

#[test]
fn det_matches_golden_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": {"scalar": {"a": -2, "b": 1, "sigma": 0, "rho": 0, "q": 0.5}}}"#);
    let last = |h: &str, name: &str| {
        let out = dir.path().join(name);
        let o = panto(&["det", "--config", &cfg, "--sim.T=100", &format!("--sim.h={h}"), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let csv = std::fs::read_to_string(out.join("det.csv")).unwrap();
        let row = csv.lines().last().unwrap().to_owned();
        let (t, x) = row.split_once(',').unwrap();
        assert_eq!(t.parse::<f64>().unwrap(), 100.0);
        x.parse::<f64>().unwrap()
    };
    let (coarse, fine) = (last("0.01", "h1"), last("0.005", "h2"));
    assert!((coarse - fine).abs() <= 1e-6);
    assert!((fine - DET_GOLDEN).abs() <= 1e-6);
}

#[test]
fn simulate_is_deterministic_and_dumps_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", &cfg, "--sim.T=5", "--analysis.window=null", "--out"];
        let o = out.to_str().unwrap().to_owned();
        args.push(&o);
        args.extend_from_slice(extra);
        assert_eq!(panto(&args).status.code(), Some(0));
        out
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    assert_eq!(std::fs::read(a.join("path_0.csv")).unwrap(), std::fs::read(b.join("path_0.csv")).unwrap());
    assert!(!a.join("path_1.csv").exists());

    let c = run("c", &["--sim.n-paths=2", "--dump"]);
    let paths: Vec<_> = std::fs::read_dir(&c)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("path_"))
        .collect();
    assert_eq!(paths.len(), 2);
    assert_eq!(std::fs::read(a.join("path_0.csv")).unwrap(), std::fs::read(c.join("path_0.csv")).unwrap());
}

#[test]
fn seed_environment_variable_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_panto"))
        .args(["simulate", "--config", &cfg, "--sim.T=5", "--analysis.window=null", "--out", out.to_str().unwrap()])
        .env("PANTO_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["master_seed"], 1234);
    assert_eq!(m["config"]["sim"]["master_seed"], 1234);
}

#[test]
fn moments_reports_estimates_without_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let out = dir.path().join("out");
    let o = panto(&["moments", "--config", &cfg, "--analysis.p=2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("moments.csv").exists());
    assert!(!out.join("verdict.json").exists());
    let e: Value = serde_json::from_slice(&std::fs::read(out.join("exponents.json")).unwrap()).unwrap();
    assert_eq!(e["estimates"][0]["kind"], "polynomial_mean");
    assert_eq!(e["report"]["p"], 2);
}

#[test]
fn multi_delay_verify_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"multi": {"a": -3, "b": [0.5, 0.5], "q": [0.5, 0.25], "sigma": 0.2, "sigma_delayed": [0.1], "r": [0.5]}},
            "sim": {"h": 0.01, "T": 100, "n_paths": 200, "master_seed": 3}}"#,
    );
    let out = dir.path().join("out");
    let o = panto(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
