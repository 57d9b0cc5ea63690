//! C interface to the noncoercive solver library.
//!
//! Problems, solutions and case results are opaque handles created and freed
//! by this library. Every fallible call returns an [`NcStatus`]; the message of
//! the last failure on the calling thread is available from
//! [`nc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use noncoercive::config::{CaseSpec, RunConfig};
use noncoercive::lorentz::{dist_to_bounded, lorentz_quasinorm, LorentzIndex, SampledScalarField};
use noncoercive::obstacle::vi_truncation_scheme;
use noncoercive::solver::truncation_continuation;
use noncoercive::verification::CaseStatus;
use noncoercive::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    DistanceTooLarge = 4,
    NotConverged = 5,
    NotAdmissible = 6,
    MeshMismatch = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

fn status_of(e: &Error) -> NcStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::InvalidField(_)
        | Error::OutOfRange(_)
        | Error::NonSpdMatrix { .. } => NcStatus::InvalidArgument,
        Error::Config { .. } | Error::MissingOverride { .. } | Error::Json(_) => NcStatus::Config,
        Error::DistanceTooLarge { .. } => NcStatus::DistanceTooLarge,
        Error::NewtonStalled { .. }
        | Error::PicardDiverged { .. }
        | Error::Stagnated { .. }
        | Error::SchemeNotCauchy { .. }
        | Error::ProjectionStalled { .. }
        | Error::ScheduleExhausted { .. }
        | Error::SingularMatrix { .. }
        | Error::NonFiniteNorm(_) => NcStatus::NotConverged,
        Error::NotAdmissible { .. } => NcStatus::NotAdmissible,
        Error::MeshMismatch => NcStatus::MeshMismatch,
        Error::Io(_) | Error::Csv(_) => NcStatus::Io,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: NcStatus, msg: impl Into<String>) -> NcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), NcStatus>) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(NcStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: noncoercive::Result<T>) -> Result<T, NcStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, NcStatus> {
    if p.is_null() {
        return Err(fail(NcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NcStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], NcStatus> {
    if p.is_null() {
        return Err(fail(NcStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), NcStatus> {
    if p.is_null() {
        Err(fail(NcStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn c_string(s: String) -> CString {
    CString::new(s.replace('\0', " ")).unwrap_or_default()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A parsed run configuration with a problem section.
pub struct NcProblem {
    config: RunConfig,
    nodes: usize,
}

pub struct NcSolution {
    values: Vec<f64>,
    report: CString,
}

pub struct NcCaseResult {
    status: CaseStatus,
    json: CString,
}

/// Parses a JSON run configuration that contains a `problem` section.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nc_problem_from_json(
    json: *const c_char,
    out: *mut *mut NcProblem,
) -> NcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let config = lift(RunConfig::from_json(text))?;
        let spec = config
            .problem
            .as_ref()
            .ok_or_else(|| fail(NcStatus::Config, "configuration has no problem section"))?;
        let nodes = lift(spec.build(config.sobolev_override))?.mesh.node_count();
        *out = Box::into_raw(Box::new(NcProblem { config, nodes }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`nc_problem_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nc_problem_free(problem: *mut NcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of mesh nodes, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_problem_node_count(problem: *const NcProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.nodes)
}

/// Runs the truncation scheme, as an obstacle problem when the configuration
/// has an obstacle.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nc_solve(
    problem: *const NcProblem,
    out: *mut *mut NcSolution,
) -> NcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let problem = problem
            .as_ref()
            .ok_or_else(|| fail(NcStatus::NullPointer, "problem is null"))?;
        let cfg = &problem.config;
        let spec = cfg.problem.as_ref().expect("checked at construction");
        let built = lift(spec.build(cfg.sobolev_override))?;
        let (u, report) = match &built.obstacle {
            Some(ob) => lift(vi_truncation_scheme(
                &built.field,
                &built.rhs,
                ob,
                &built.mesh,
                &built.sobolev,
                &cfg.solver,
            ))?,
            None => lift(truncation_continuation(
                &built.field,
                &built.rhs,
                &built.mesh,
                &built.sobolev,
                &cfg.solver,
            ))?,
        };
        let u = match &built.shift {
            Some(g) => lift(u.axpy(1.0, g))?,
            None => u,
        };
        let mut json = Vec::new();
        lift(report.write_json(&mut json))?;
        let report = c_string(String::from_utf8_lossy(&json).into_owned());
        *out = Box::into_raw(Box::new(NcSolution {
            values: u.into_coefficients(),
            report,
        }));
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_len(solution: *const NcSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.values.len())
}

/// Copies the nodal values into `buf`, which must hold `nc_solution_len` values.
///
/// # Safety
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_values(
    solution: *const NcSolution,
    buf: *mut f64,
    len: usize,
) -> NcStatus {
    guard(|| {
        let s = solution
            .as_ref()
            .ok_or_else(|| fail(NcStatus::NullPointer, "solution is null"))?;
        out_arg(buf, "buf")?;
        if len < s.values.len() {
            return Err(fail(
                NcStatus::BufferTooSmall,
                format!("need {} values, got {len}", s.values.len()),
            ));
        }
        ptr::copy_nonoverlapping(s.values.as_ptr(), buf, s.values.len());
        Ok(())
    })
}

/// Solve report as JSON, owned by the handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_report_json(solution: *const NcSolution) -> *const c_char {
    solution.as_ref().map_or(ptr::null(), |s| s.report.as_ptr())
}

/// # Safety
/// `solution` must be null or a handle from [`nc_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_free(solution: *mut NcSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

unsafe fn sampled(
    values: *const f64,
    weights: *const f64,
    n: usize,
) -> Result<SampledScalarField, NcStatus> {
    let v = slice_arg(values, n, "values")?;
    let w = slice_arg(weights, n, "weights")?;
    lift(SampledScalarField::from_weights(
        1,
        vec![0.0; n],
        v.to_vec(),
        w.to_vec(),
    ))
}

/// Distance to `L^∞` in `L^{p,∞}` of a weighted sample set.
///
/// # Safety
/// `values` and `weights` must be valid for `n` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn nc_dist_to_bounded(
    values: *const f64,
    weights: *const f64,
    n: usize,
    p: f64,
    tol: f64,
    out: *mut f64,
) -> NcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let f = sampled(values, weights, n)?;
        *out = lift(dist_to_bounded(&f, p, tol))?;
        Ok(())
    })
}

/// `‖f‖_{p,q}` of a weighted sample set; `q = INFINITY` selects the weak space.
///
/// # Safety
/// `values` and `weights` must be valid for `n` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn nc_lorentz_norm(
    values: *const f64,
    weights: *const f64,
    n: usize,
    p: f64,
    q: f64,
    out: *mut f64,
) -> NcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let f = sampled(values, weights, n)?;
        let idx = lift(LorentzIndex::new(p, q))?;
        *out = lift(lorentz_quasinorm(&f, idx))?;
        Ok(())
    })
}

/// Runs a verification case. `params_json` is a JSON object of case
/// parameters, or null for the defaults.
///
/// # Safety
/// `name` must be a valid string, `params_json` null or a valid string, `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nc_verify(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut NcCaseResult,
) -> NcStatus {
    guard(|| {
        out_arg(out, "out")?;
        let name = str_arg(name, "name")?;
        let params = if params_json.is_null() {
            serde_json::Map::new()
        } else {
            let text = str_arg(params_json, "params_json")?;
            match lift(serde_json::from_str(text).map_err(Error::from))? {
                serde_json::Value::Object(m) => m,
                _ => {
                    return Err(fail(
                        NcStatus::Config,
                        "case parameters must be a JSON object",
                    ))
                }
            }
        };
        let case = lift(CaseSpec::from_name(name, params))?;
        let cfg = RunConfig::default();
        let result = lift(case.run(&cfg.solver, cfg.sobolev_override))?;
        let status = result.status();
        let mut value = lift(serde_json::to_value(&result).map_err(Error::from))?;
        value["status"] = serde_json::json!(status);
        *out = Box::into_raw(Box::new(NcCaseResult {
            status,
            json: c_string(value.to_string()),
        }));
        Ok(())
    })
}

/// 0 for pass, 2 for record-only deviations, 1 for failed checks; -1 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_case_status(result: *const NcCaseResult) -> i32 {
    match result.as_ref().map(|r| r.status) {
        Some(CaseStatus::Pass) => 0,
        Some(CaseStatus::RecordOnly) => 2,
        Some(CaseStatus::Fail) => 1,
        None => -1,
    }
}

/// Case result as JSON, owned by the handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_case_json(result: *const NcCaseResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// # Safety
/// `result` must be null or a handle from [`nc_verify`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nc_case_free(result: *mut NcCaseResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_statuses() {
        assert_eq!(status_of(&Error::MeshMismatch), NcStatus::MeshMismatch);
        let e = Error::DistanceTooLarge {
            distance: 2.0,
            threshold: 1.0,
            sobolev: 1.0,
            provenance: "test".into(),
        };
        assert_eq!(status_of(&e), NcStatus::DistanceTooLarge);
    }

    #[test]
    fn last_error_is_thread_local() {
        set_error("here");
        let msg = unsafe { CStr::from_ptr(nc_last_error()) }
            .to_str()
            .unwrap()
            .to_owned();
        assert_eq!(msg, "here");
        let other = std::thread::spawn(|| nc_last_error().is_null())
            .join()
            .unwrap();
        assert!(other);
    }
}
