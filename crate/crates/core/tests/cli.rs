use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_noncoercive"));
    c.env_remove("NONCOERCIVE_OUT");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

const DRIFT_PROBLEM: &str = r#"{
  "problem": {
    "domain": {"kind": "radial", "dim": 3, "cells": 32},
    "field": {
      "p": 2,
      "drift": {"kind": "radial", "profile": {"kind": "inverse_radius", "amplitude": AMP}},
      "b": {"kind": "power_law", "amplitude": AMP, "exponent": -1}
    },
    "rhs": {"kind": "RHS"}
  },
  "output": "out"
}"#;

fn problem(dir: &Path, amp: f64, rhs: &str) -> String {
    let text = DRIFT_PROBLEM
        .replace("AMP", &amp.to_string())
        .replace("RHS", rhs);
    let text = if rhs == "load" {
        text.replace(
            r#"{"kind": "load"}"#,
            r#"{"kind": "load", "profile": {"kind": "constant", "value": 1}}"#,
        )
    } else {
        text
    };
    let path = dir.join(format!("config_{amp}_{rhs}.json"));
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn verify_dist_radial_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "verify",
            "dist_radial",
            "--B",
            "1",
            "--N",
            "2",
            "--output",
            "o",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("dist_radial: Pass"));
    let csv = fs::read_to_string(dir.path().join("o/dist_radial/distance_history.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    assert!(dir.path().join("o/dist_radial/result.json").exists());
}

#[test]
fn zero_rhs_gives_zero_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = problem(dir.path(), 0.1, "zero");
    let out = run(dir.path(), &["-c", &cfg, "solve"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/solve/solution.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn distance_violation_is_an_error_naming_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = problem(dir.path(), 5.0, "load");
    let out = run(dir.path(), &["-c", &cfg, "solve"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("distance condition violated"), "{err}");
    assert!(err.contains("is not below"), "{err}");
}

#[test]
fn repeated_runs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = problem(dir.path(), 0.1, "load");
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out = run(dir.path(), &["-c", &cfg, "--output", tag, "solve"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let sol = fs::read(dir.path().join(tag).join("solve/solution.csv")).unwrap();
        let hist = fs::read(dir.path().join(tag).join("solve/history.csv")).unwrap();
        outputs.push((sol, hist));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"solver\": {\"newton_tol\": \"small\"}\n}").unwrap();
    let out = run(
        dir.path(),
        &["-c", path.to_str().unwrap(), "verify", "dist_radial"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("solver.newton_tol"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .env("NONCOERCIVE_OUT", "from_env")
        .args(["verify", "dist_radial", "--B", "2", "--N", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from_env/dist_radial/result.json").exists());
}

#[test]
fn sweep_runs_all_cases_and_reports_worst_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    fs::write(
        &path,
        r#"{"output": "s", "workers": 2, "cases": [
            {"case": "dist_radial", "B": 1, "N": 2},
            {"case": "dist_radial", "B": 0.5, "N": 4},
            {"case": "example_resonance", "refinements": 2}
        ]}"#,
    )
    .unwrap();
    let out = run(dir.path(), &["-c", path.to_str().unwrap(), "sweep"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let summary = fs::read_to_string(dir.path().join("s/sweep/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(dir
        .path()
        .join("s/sweep/002/example_resonance/result.json")
        .exists());
}

#[test]
fn lorentz_dist_of_inverse_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["lorentz", "dist", "--B", "1", "--N", "2", "--output", "o"],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value: f64 = stdout.split("= ").nth(1).unwrap().trim().parse().unwrap();
    assert!(
        (value - std::f64::consts::PI.sqrt()).abs() < 1e-3 * value,
        "{stdout}"
    );
}

#[test]
fn obstacle_command_writes_contact_set() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ob.json");
    fs::write(
        &path,
        r#"{"output": "o", "problem": {
            "domain": {"kind": "radial", "dim": 3, "cells": 32},
            "field": {"p": 2, "b": {"kind": "constant", "value": 0}},
            "rhs": {"kind": "load", "profile": {"kind": "constant", "value": -3}},
            "obstacle": {"psi": {"kind": "constant", "value": -0.05}}}}"#,
    )
    .unwrap();
    let out = run(dir.path(), &["-c", path.to_str().unwrap(), "obstacle"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let contact = fs::read_to_string(dir.path().join("o/obstacle/contact.csv")).unwrap();
    assert!(contact.lines().count() > 10);
    assert!(dir.path().join("o/obstacle/complementarity.json").exists());
}
