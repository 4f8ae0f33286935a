use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tsdyn_cli::output::read_solution_csv;

fn tsdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsdyn")).args(args).output().expect("binary runs")
}

fn bundled_config(dir: &Path) -> String {
    let path = dir.join("example5.json");
    std::fs::write(&path, tsdyn_cli::config::EXAMPLE5).unwrap();
    path.to_str().unwrap().to_string()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("error record on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn example_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = tsdyn(&["example", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["check.json", "bounded.csv", "theta1.csv", "theta2.csv", "returns.json", "verify.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let verify: Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(verify["mpps"]["pass"], Value::Bool(true));
    assert_eq!(verify["mpps"]["kind"], "mpps");
}

#[test]
fn zero_matrix_fails_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let out = dir.path().join("out");
    let o = tsdyn(&["check", "--config", &cfg, "--out", out.to_str().unwrap(), "--override", "matrix=[0,0,0,0]"]);
    assert_eq!(o.status.code(), Some(1));
    let check: Value = serde_json::from_str(&std::fs::read_to_string(out.join("check.json")).unwrap()).unwrap();
    assert_eq!(check["a2"]["pass"], Value::Bool(false));
    assert!((check["a2"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(check["cert"], Value::Null);
}

#[test]
fn start_outside_time_scale_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let out = dir.path().join("out");
    let o = tsdyn(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--override", "windows.sim_t0=2"]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["error"]["kind"], "config");
    assert!(out.join("error.json").exists());
}

#[test]
fn invalid_time_scale_reports_the_violated_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let out = dir.path().join("out");
    let o = tsdyn(&["check", "--config", &cfg, "--out", out.to_str().unwrap(), "--override", "timescale.delta=9"]);
    assert_eq!(o.status.code(), Some(2));
    let details = error_record(&o)["error"]["details"].to_string();
    assert!(details.contains("ω > δ violated"), "{details}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(tsdyn(&["frobnicate", "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(tsdyn(&["check", "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(tsdyn(&["check", "--config", "/nonexistent.json", "--out", "x"]).status.code(), Some(2));
    assert_eq!(tsdyn(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_writes_readable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let out = dir.path().join("out");
    let o = tsdyn(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--override",
        "windows.sim_t_end=20",
        "--override",
        "windows.sim_y0=[1,-1]",
        "--override",
        "tolerances.rk_step=0.01",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_solution_csv(&out.join("trajectory.csv")).unwrap();
    assert_eq!(rows[0].t, 0.0);
    assert_eq!(rows[0].y, vec![1.0, -1.0]);
    let ends: Vec<f64> = rows.iter().filter(|r| r.branch == tsdyn_core::Branch::RightEndpointValue).map(|r| r.t).collect();
    assert_eq!(ends, vec![4.0, 12.0, 20.0]);
    assert!(rows.windows(2).all(|w| w[0].t < w[1].t));
    assert!(out.join("trajectory_impulsive.csv").exists());
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = tsdyn(&["decompose", "--config", &cfg, "--out", out.to_str().unwrap(), "--override", "windows.sim_t_end=20"]);
        assert_eq!(o.status.code(), Some(0));
        (std::fs::read(out.join("theta1.csv")).unwrap(), std::fs::read(out.join("theta2.csv")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn returns_with_explicit_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_config(dir.path());
    let out = dir.path().join("out");
    let o = tsdyn(&[
        "returns",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--override",
        "windows.return_window=[0,20]",
        "--override",
        "windows.max_returns=3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out.join("returns.json")).unwrap()).unwrap();
    let entries = r["returns"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    assert_eq!(r["returns"]["k_lo"], 0);
    assert_eq!(r["padding_depth"], Value::Null);
}
