use std::ffi::{CStr, CString};
use std::ptr;

use noncoercive_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nc_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn problem_json(amp: f64) -> CString {
    CString::new(format!(
        r#"{{"problem": {{
            "domain": {{"kind": "radial", "dim": 3, "cells": 32}},
            "field": {{"p": 2,
                "drift": {{"kind": "radial", "profile": {{"kind": "inverse_radius", "amplitude": {amp}}}}},
                "b": {{"kind": "power_law", "amplitude": {amp}, "exponent": -1}}}},
            "rhs": {{"kind": "load", "profile": {{"kind": "constant", "value": 1}}}}}}}}"#
    ))
    .unwrap()
}

#[test]
fn solve_roundtrip() {
    let json = problem_json(0.1);
    let mut problem = ptr::null_mut();
    let st = unsafe { nc_problem_from_json(json.as_ptr(), &mut problem) };
    assert_eq!(st, NcStatus::Ok, "{}", last_error());
    let nodes = unsafe { nc_problem_node_count(problem) };
    assert_eq!(nodes, 33);

    let mut sol = ptr::null_mut();
    assert_eq!(
        unsafe { nc_solve(problem, &mut sol) },
        NcStatus::Ok,
        "{}",
        last_error()
    );
    let n = unsafe { nc_solution_len(sol) };
    assert_eq!(n, nodes);
    let mut small = vec![0.0; n - 1];
    assert_eq!(
        unsafe { nc_solution_values(sol, small.as_mut_ptr(), small.len()) },
        NcStatus::BufferTooSmall
    );
    let mut values = vec![0.0; n];
    assert_eq!(
        unsafe { nc_solution_values(sol, values.as_mut_ptr(), n) },
        NcStatus::Ok
    );
    assert!(values[0] > 0.0 && values[n - 1].abs() < 1e-14);
    let report = unsafe { CStr::from_ptr(nc_solution_report_json(sol)) }
        .to_str()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(report).unwrap();
    assert!(report["levels"].is_array());
    unsafe {
        nc_solution_free(sol);
        nc_problem_free(problem);
    }
}

#[test]
fn distance_violation_maps_to_status() {
    let json = problem_json(5.0);
    let mut problem = ptr::null_mut();
    assert_eq!(
        unsafe { nc_problem_from_json(json.as_ptr(), &mut problem) },
        NcStatus::Ok
    );
    let mut sol = ptr::null_mut();
    assert_eq!(
        unsafe { nc_solve(problem, &mut sol) },
        NcStatus::DistanceTooLarge
    );
    assert!(sol.is_null());
    assert!(last_error().contains("distance condition violated"));
    unsafe { nc_problem_free(problem) };
}

#[test]
fn bad_config_reports_path() {
    let json = CString::new(r#"{"solver": {"newton_tol": "x"}, "problem": null}"#).unwrap();
    let mut problem = ptr::null_mut();
    assert_eq!(
        unsafe { nc_problem_from_json(json.as_ptr(), &mut problem) },
        NcStatus::Config
    );
    assert!(
        last_error().contains("solver.newton_tol"),
        "{}",
        last_error()
    );
    let missing = CString::new("{}").unwrap();
    assert_eq!(
        unsafe { nc_problem_from_json(missing.as_ptr(), &mut problem) },
        NcStatus::Config
    );
    assert_eq!(
        unsafe { nc_problem_from_json(ptr::null(), &mut problem) },
        NcStatus::NullPointer
    );
}

#[test]
fn weak_norm_and_distance() {
    // f = x^{-1/2} on (0, 1] sampled at midpoints of a fine uniform grid.
    let n = 200_000;
    let h = 1.0 / n as f64;
    let values: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((i as f64 + 0.5) * h).sqrt())
        .collect();
    let weights = vec![h; n];
    let mut out = 0.0;
    let st = unsafe {
        nc_lorentz_norm(
            values.as_ptr(),
            weights.as_ptr(),
            n,
            2.0,
            f64::INFINITY,
            &mut out,
        )
    };
    assert_eq!(st, NcStatus::Ok, "{}", last_error());
    // Values decrease with i, so the supremum over levels is max_i f_i sqrt((i + 1) h).
    let exact = (0..n)
        .map(|i| values[i] * ((i + 1) as f64 * h).sqrt())
        .fold(0.0, f64::max);
    assert!((out - exact).abs() < 1e-12 * exact, "{out} vs {exact}");
    let st =
        unsafe { nc_dist_to_bounded(values.as_ptr(), weights.as_ptr(), n, 2.0, 1e-4, &mut out) };
    assert_eq!(st, NcStatus::Ok, "{}", last_error());
    // A finite sample set is bounded.
    assert_eq!(out, 0.0);
    let st = unsafe { nc_lorentz_norm(values.as_ptr(), weights.as_ptr(), n, 0.5, 1.0, &mut out) };
    assert_eq!(st, NcStatus::InvalidArgument);
}

#[test]
fn verify_case_by_name() {
    let name = CString::new("dist_radial").unwrap();
    let params = CString::new(r#"{"B": 2, "N": 3}"#).unwrap();
    let mut res = ptr::null_mut();
    assert_eq!(
        unsafe { nc_verify(name.as_ptr(), params.as_ptr(), &mut res) },
        NcStatus::Ok,
        "{}",
        last_error()
    );
    assert_eq!(unsafe { nc_case_status(res) }, 0);
    let json: serde_json::Value = serde_json::from_str(
        unsafe { CStr::from_ptr(nc_case_json(res)) }
            .to_str()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(json["status"], "pass");
    unsafe { nc_case_free(res) };

    let unknown = CString::new("no_such_case").unwrap();
    assert_eq!(
        unsafe { nc_verify(unknown.as_ptr(), ptr::null(), &mut res) },
        NcStatus::Config
    );
    assert_eq!(unsafe { nc_case_status(ptr::null()) }, -1);
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(nc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
