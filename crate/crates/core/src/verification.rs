//! Verification cases with closed-form or independently computed oracles.
//!
//! Each case returns a [`CaseResult`] whose checks are either asserted
//! against an oracle or explicitly record-only.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::discretization::{
    gradient_error, lp_norm, mass_matrix, norm_w1p, stiffness_matrix, w1p_distance,
    DiscreteFunction, RhsFunctional,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, CsrMatrix};
use crate::lorentz::{dist_to_bounded_with, DistanceSchedule, SobolevConstant};
use crate::mesh::Mesh;
use crate::obstacle::{complementarity_residual_frozen, probe_family, vi_frozen_solve, Obstacle};
use crate::profile::{norm, Coefficient, ScalarProfile, VectorCoefficient};
use crate::solver::{
    frozen_solve, resolvent_fixed_point, truncation_continuation, weak_form_probes, SolveConfig,
};
use crate::structural::{choose_truncation_level_with, ModelData, QuasilinearField};
use crate::{sobolev_exponent, unit_ball_measure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    ClosedForm,
    Derived,
    Record,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Relative,
    Absolute,
    AtLeast,
    AtMost,
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub oracle: Option<f64>,
    pub kind: OracleKind,
    pub comparison: Comparison,
    pub tolerance: f64,
    /// `None` for record-only checks.
    pub passed: Option<bool>,
    /// Record-only check whose expectation was not met.
    pub deviates: bool,
}

fn holds(computed: f64, oracle: f64, comparison: Comparison, tolerance: f64) -> bool {
    match comparison {
        Comparison::Relative => (computed - oracle).abs() <= tolerance * oracle.abs(),
        Comparison::Absolute => (computed - oracle).abs() <= tolerance,
        Comparison::AtLeast => computed >= oracle,
        Comparison::AtMost => computed <= oracle,
        Comparison::None => true,
    }
}

impl Check {
    fn asserted(
        name: &str,
        computed: f64,
        oracle: f64,
        kind: OracleKind,
        comparison: Comparison,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            computed,
            oracle: Some(oracle),
            kind,
            comparison,
            tolerance,
            passed: Some(holds(computed, oracle, comparison, tolerance)),
            deviates: false,
        }
    }

    pub fn relative(
        name: &str,
        computed: f64,
        oracle: f64,
        tolerance: f64,
        kind: OracleKind,
    ) -> Self {
        Self::asserted(
            name,
            computed,
            oracle,
            kind,
            Comparison::Relative,
            tolerance,
        )
    }

    pub fn absolute(
        name: &str,
        computed: f64,
        oracle: f64,
        tolerance: f64,
        kind: OracleKind,
    ) -> Self {
        Self::asserted(
            name,
            computed,
            oracle,
            kind,
            Comparison::Absolute,
            tolerance,
        )
    }

    pub fn at_least(name: &str, computed: f64, bound: f64, kind: OracleKind) -> Self {
        Self::asserted(name, computed, bound, kind, Comparison::AtLeast, 0.0)
    }

    pub fn at_most(name: &str, computed: f64, bound: f64, kind: OracleKind) -> Self {
        Self::asserted(name, computed, bound, kind, Comparison::AtMost, 0.0)
    }

    pub fn record(name: &str, computed: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            oracle: None,
            kind: OracleKind::Record,
            comparison: Comparison::None,
            tolerance: 0.0,
            passed: None,
            deviates: false,
        }
    }

    /// Record-only check with an expectation whose failure is reported as a
    /// deviation rather than a failure.
    pub fn record_expecting(name: &str, computed: f64, bound: f64, comparison: Comparison) -> Self {
        Self {
            name: name.into(),
            computed,
            oracle: Some(bound),
            kind: OracleKind::Record,
            comparison,
            tolerance: 0.0,
            passed: None,
            deviates: !holds(computed, bound, comparison, 0.0),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Pass,
    RecordOnly,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseResult {
    pub case: String,
    pub parameters: Value,
    pub checks: Vec<Check>,
    pub curves: Vec<Curve>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

impl CaseResult {
    pub fn new(case: &str, parameters: Value) -> Self {
        Self {
            case: case.into(),
            parameters,
            checks: Vec::new(),
            curves: Vec::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn status(&self) -> CaseStatus {
        if self.checks.iter().any(|c| c.passed == Some(false)) {
            CaseStatus::Fail
        } else if self.checks.iter().any(|c| c.deviates) {
            CaseStatus::RecordOnly
        } else {
            CaseStatus::Pass
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn curve(&self, name: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| c.passed == Some(false))
            .collect()
    }

    /// Writes `result.json` and one CSV per curve into `dir/<case>/`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        let dir = dir.join(&self.case);
        fs::create_dir_all(&dir)?;
        self.artifacts.clear();
        for curve in &self.curves {
            let path = dir.join(format!("{}.csv", curve.name));
            curve.write_csv(fs::File::create(&path)?)?;
            self.artifacts.push(path.display().to_string());
        }
        let mut out = serde_json::to_value(&*self)?;
        out["status"] = serde_json::to_value(self.status())?;
        let mut file = fs::File::create(dir.join("result.json"))?;
        serde_json::to_writer_pretty(&mut file, &out)?;
        std::io::Write::write_all(&mut file, b"\n")?;
        Ok(())
    }
}

/// Smallest observed order `log2(e_k / e_{k+1})` of successive halvings.
pub fn observed_order(errors: &[f64]) -> f64 {
    errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min)
}

fn radial_mesh_for_dist(dim: usize) -> Result<Arc<Mesh>> {
    Mesh::radial_graded_ratio(dim, 1.0, 1e-6, 1.001)
}

/// Schedule `k = B, 2B, …` so that the cutoffs scale with the amplitude.
fn dist_of_inverse_radius(
    mesh: &Arc<Mesh>,
    amplitude: f64,
) -> Result<crate::lorentz::DistanceEstimate> {
    let b = Coefficient::inverse_radius(amplitude);
    let values: Vec<f64> = (0..mesh.qp_count())
        .map(|q| b.eval(mesh.qp_point(q)))
        .collect();
    let f = crate::SampledScalarField::new(
        mesh.field_dim(),
        mesh.qp_points_flat().to_vec(),
        values,
        mesh.qp_weights().to_vec(),
        mesh.domain_measure(),
    )?;
    let schedule = DistanceSchedule {
        first: amplitude,
        ..DistanceSchedule::default()
    };
    dist_to_bounded_with(&f, mesh.field_dim() as f64, 1e-4 * amplitude, schedule)
}

/// `dist(B/|x|, L^∞)` in `L^{N,∞}` of the unit ball against `B ω_N^{1/N}`.
pub fn dist_radial(amplitude: f64, dim: usize) -> Result<CaseResult> {
    if !(amplitude > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitude B = {amplitude} must be positive"
        )));
    }
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "dimension N = {dim} must be at least 2"
        )));
    }
    let mesh = radial_mesh_for_dist(dim)?;
    let mut res = CaseResult::new(
        "dist_radial",
        json!({ "B": amplitude, "N": dim, "cells": mesh.cell_count() }),
    );
    let est = dist_of_inverse_radius(&mesh, amplitude)?;
    let twice = dist_of_inverse_radius(&mesh, 2.0 * amplitude)?;
    let oracle = amplitude * unit_ball_measure(dim).powf(1.0 / dim as f64);
    res.checks.push(Check::relative(
        "distance",
        est.value,
        oracle,
        1e-3,
        OracleKind::ClosedForm,
    ));
    res.checks.push(Check::relative(
        "homogeneity",
        twice.value,
        2.0 * est.value,
        1e-6,
        OracleKind::Derived,
    ));
    let mut curve = Curve::new("distance_history", &["k", "excess_weak_norm"]);
    for (k, v) in &est.history {
        curve.push(vec![*k, *v]);
    }
    res.curves.push(curve);
    Ok(res)
}

/// `u_1` of the concentrating family on the ball of radius 3.
fn concentration_profile(r: f64, gamma: f64) -> f64 {
    let c = 2f64.powf(gamma);
    if r < 1.0 {
        1.0 - c
    } else if r < 2.0 {
        r.powf(gamma) - c
    } else {
        0.0
    }
}

fn concentration_member(r: f64, n: f64, gamma: f64) -> f64 {
    n.powf(-gamma) * concentration_profile(n * r, gamma)
}

/// Composite Gauss–Legendre on `[a, b]`.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let (x, w) = crate::quadrature::gauss_legendre(5);
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * h;
            x.iter()
                .zip(w)
                .map(|(xi, wi)| 0.5 * wi * h * f(lo + 0.5 * (xi + 1.0) * h))
                .sum::<f64>()
        })
        .sum()
}

/// Norms `‖∇u_n‖_p^p` and `‖(|u_n|/|x|)^{p-1}‖_{p'}^{p'}` of the concentrating
/// family, which are independent of `n`.
pub fn example_concentration(
    dim: usize,
    p: f64,
    n_list: &[u64],
    cells: usize,
) -> Result<CaseResult> {
    let nf = dim as f64;
    if dim < 2 || !(p > 1.0 && p < nf) {
        return Err(Error::InvalidArgument(format!(
            "need N >= 2 and 1 < p < N (N = {dim}, p = {p})"
        )));
    }
    let gamma = 1.0 - nf / p;
    let mesh = Mesh::radial_uniform(dim, 3.0, cells)?;
    let mut res = CaseResult::new(
        "example_concentration",
        json!({ "N": dim, "p": p, "n": n_list, "cells": cells }),
    );
    let omega = unit_ball_measure(dim);
    let grad_oracle = gamma.abs().powf(p) * nf * omega * 2f64.ln();
    let c = 2f64.powf(gamma);
    let tail = integrate(
        |r| r.powf(nf - p - 1.0) * (r.powf(gamma) - c).powf(p),
        1.0,
        2.0,
        64,
    );
    let lower_oracle = nf * omega * ((1.0 - c).powf(p) / (nf - p) + tail);
    let mut curve = Curve::new("norms", &["n", "gradient_norm_p", "lower_order_norm"]);
    let (mut grads, mut lowers) = (Vec::new(), Vec::new());
    for &n in n_list {
        let u = DiscreteFunction::interpolate(
            &mesh,
            |x| concentration_member(norm(x), n as f64, gamma),
            true,
        );
        let grad = norm_w1p(&u, p).powf(p);
        let lower: f64 = (0..mesh.qp_count())
            .map(|q| {
                let r = norm(mesh.qp_point(q));
                mesh.qp_weight(q) * (u.value_at_qp(q).abs() / r).powf(p)
            })
            .sum();
        curve.push(vec![n as f64, grad, lower]);
        grads.push(grad);
        lowers.push(lower);
    }
    let spread = |v: &[f64]| {
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        max / min - 1.0
    };
    for (k, &n) in n_list.iter().enumerate() {
        res.checks.push(Check::relative(
            &format!("gradient_norm_n{n}"),
            grads[k],
            grad_oracle,
            0.02,
            OracleKind::ClosedForm,
        ));
        res.checks.push(Check::relative(
            &format!("lower_order_norm_n{n}"),
            lowers[k],
            lower_oracle,
            0.02,
            OracleKind::Derived,
        ));
    }
    res.checks.push(Check::at_most(
        "gradient_norm_spread",
        spread(&grads),
        0.02,
        OracleKind::Derived,
    ));
    res.checks.push(Check::at_most(
        "lower_order_norm_spread",
        spread(&lowers),
        0.02,
        OracleKind::Derived,
    ));
    let pos = |n| n_list.iter().position(|&m| m == n);
    if let (Some(a), Some(b)) = (pos(2), pos(8)) {
        res.checks.push(Check::relative(
            "gradient_ratio_2_8",
            grads[a] / grads[b],
            1.0,
            0.02,
            OracleKind::Derived,
        ));
    }
    // sup of (b|u_n|)^{p-1} over 1 <= |x| <= 2, evaluated from the formula
    let sup = |n: f64| {
        (0..=200)
            .map(|k| {
                let r = 1.0 + k as f64 / 200.0;
                (concentration_member(r, n, gamma).abs() / r).powf(p - 1.0)
            })
            .fold(0.0, f64::max)
    };
    res.checks.push(Check::at_most(
        "annulus_sup_n16",
        sup(16.0),
        1e-2 * sup(1.0),
        OracleKind::Derived,
    ));
    res.curves.push(curve);
    Ok(res)
}

fn laplacian_field(dim: usize, p: f64) -> Result<QuasilinearField> {
    QuasilinearField::model(
        ModelData::p_laplacian(dim, p),
        Coefficient::zero(),
        Coefficient::zero(),
    )
}

/// `−Δu = N` on the unit ball against `u = (1 − r²)/2`, nodal maximum error.
pub fn manufactured_laplacian(
    dim: usize,
    cells: &[usize],
    config: &SolveConfig,
) -> Result<CaseResult> {
    let mut res = CaseResult::new(
        "manufactured_laplacian",
        json!({ "N": dim, "cells": cells }),
    );
    let field = laplacian_field(dim, 2.0)?;
    let mut curve = Curve::new("errors", &["cells", "h", "nodal_max_error"]);
    let mut errors = Vec::new();
    for &n in cells {
        let mesh = Mesh::radial_uniform(dim, 1.0, n)?;
        let u = frozen_solve(
            &field,
            &DiscreteFunction::zeros(&mesh),
            &RhsFunctional::constant_load(dim as f64),
            config,
        )?;
        let err = (0..mesh.node_count())
            .map(|i| (u.coefficients()[i] - (1.0 - mesh.node_radius(i).powi(2)) / 2.0).abs())
            .fold(0.0, f64::max);
        curve.push(vec![n as f64, mesh.max_cell_size(), err]);
        errors.push(err);
    }
    res.checks.push(Check::at_least(
        "observed_order",
        observed_order(&errors),
        1.8,
        OracleKind::Derived,
    ));
    res.curves.push(curve);
    Ok(res)
}

/// `−Δ_p u = 1` on the unit ball against the radial profile
/// `u = N^{-1/(p-1)} (1 − r^{p'}) / p'`, error in `‖∇·‖_p`.
pub fn manufactured_p_laplacian(
    dim: usize,
    p: f64,
    cells: &[usize],
    config: &SolveConfig,
) -> Result<CaseResult> {
    let mut res = CaseResult::new(
        "manufactured_p_laplacian",
        json!({ "N": dim, "p": p, "cells": cells }),
    );
    let field = laplacian_field(dim, p)?;
    let nf = dim as f64;
    let mut curve = Curve::new("errors", &["cells", "h", "w1p_error"]);
    let mut errors = Vec::new();
    for &n in cells {
        let mesh = Mesh::radial_uniform(dim, 1.0, n)?;
        let u = frozen_solve(
            &field,
            &DiscreteFunction::zeros(&mesh),
            &RhsFunctional::constant_load(1.0),
            config,
        )?;
        let err = gradient_error(
            &u,
            |x, out| {
                let r = norm(x);
                let slope = -(r / nf).powf(1.0 / (p - 1.0));
                out.iter_mut().for_each(|o| *o = 0.0);
                if r > 0.0 {
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = slope * xi / r;
                    }
                }
            },
            p,
        );
        curve.push(vec![n as f64, mesh.max_cell_size(), err]);
        errors.push(err);
    }
    res.checks.push(Check::at_least(
        "observed_order",
        observed_order(&errors),
        0.9,
        OracleKind::Derived,
    ));
    res.curves.push(curve);
    Ok(res)
}

/// Model field with drift `B x/|x|²` and `b = (B/|x|)^{1/(p-1)}`.
pub fn model_with_inverse_radius_drift(
    dim: usize,
    p: f64,
    amplitude: f64,
) -> Result<QuasilinearField> {
    let data = ModelData::p_laplacian(dim, p).with_drift(VectorCoefficient::radial(
        ScalarProfile::InverseRadius { amplitude },
    ));
    let b = Coefficient::from_profile(ScalarProfile::PowerLaw {
        amplitude: amplitude.abs().powf(1.0 / (p - 1.0)),
        exponent: -1.0 / (p - 1.0),
    });
    QuasilinearField::model(data, b, Coefficient::zero())
}

/// Truncation scheme on the model problem with `b = B/|x|`: convergence,
/// weak-form probes, monitor stability and the arctan pairing sign.
pub fn scheme_consistency(
    dim: usize,
    amplitude: f64,
    cells: usize,
    sobolev_override: Option<f64>,
    config: &SolveConfig,
) -> Result<CaseResult> {
    let p = 2.0;
    let mesh = Mesh::radial_uniform(dim, 1.0, cells)?;
    let field = model_with_inverse_radius_drift(dim, p, amplitude)?;
    let sobolev = crate::lorentz::sobolev_constant(dim, p, Some(&mesh), sobolev_override)?;
    let rhs = RhsFunctional::constant_load(1.0);
    let mut res = CaseResult::new(
        "scheme_consistency",
        json!({ "N": dim, "p": p, "B": amplitude, "cells": cells, "sobolev": sobolev.value }),
    );
    let (u, report) = match truncation_continuation(&field, &rhs, &mesh, &sobolev, config) {
        Ok(v) => v,
        Err(e @ Error::SchemeNotCauchy { .. }) => {
            res.notes.push(e.to_string());
            res.checks.push(Check::at_least(
                "scheme_converged",
                0.0,
                1.0,
                OracleKind::Derived,
            ));
            return Ok(res);
        }
        Err(e) => return Err(e),
    };
    res.checks.push(Check::at_least(
        "scheme_converged",
        1.0,
        1.0,
        OracleKind::Derived,
    ));
    if let Some(t) = &report.truncation {
        res.checks.push(Check::record("distance", t.distance));
        res.checks.push(Check::record("threshold", t.threshold));
        res.checks
            .push(Check::record("first_level", t.level as f64));
    }
    let probes = weak_form_probes(&field, &u, &rhs, 20, 11)?;
    res.checks.push(Check::at_most(
        "weak_form_defect",
        probes.max_ratio,
        10.0 * config.newton_tol,
        OracleKind::Derived,
    ));
    let variation = report.monitor_variation().unwrap_or(0.0);
    res.checks.push(Check::at_most(
        "monitor_variation",
        variation,
        0.05,
        OracleKind::Derived,
    ));
    let norms: Vec<f64> = report.levels.iter().map(|l| l.w1p_norm).collect();
    let growth = if norms.len() >= 2 {
        norms[norms.len() - 1] / norms[norms.len() - 2] - 1.0
    } else {
        0.0
    };
    res.checks.push(Check::at_most(
        "bound_growth",
        growth,
        0.05,
        OracleKind::Derived,
    ));
    let min_gamma = report
        .gamma_diagnostic
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_gamma.is_finite() {
        res.checks.push(Check::at_least(
            "arctan_pairing_min",
            min_gamma,
            -1e-14,
            OracleKind::Derived,
        ));
    }
    let mut curve = Curve::new(
        "levels",
        &[
            "level",
            "w1p_norm",
            "max_c_est",
            "difference",
            "arctan_pairing",
        ],
    );
    for (k, level) in report.levels.iter().enumerate() {
        let c = level.monitor.iter().map(|m| m.c_est).fold(0.0, f64::max);
        let d = if k == 0 {
            f64::NAN
        } else {
            report.level_differences[k - 1]
        };
        let g = if k == 0 {
            f64::NAN
        } else {
            report.gamma_diagnostic[k - 1]
        };
        curve.push(vec![
            level.level.unwrap_or(0) as f64,
            level.w1p_norm,
            c,
            d,
            g,
        ]);
    }
    res.curves.push(curve);
    Ok(res)
}

fn adjoint_solution(r: f64, dim: usize, gamma: f64) -> (f64, f64) {
    let e = 2.0 - dim as f64 + gamma;
    if e.abs() < 1e-12 {
        (r.ln(), 1.0 / r)
    } else {
        ((r.powf(e) - 1.0) / e, r.powf(e - 1.0))
    }
}

/// `max_i |a*(I_h v, w_i)| / ∫ w_i` over hat functions supported in `|x| >= r0`,
/// where `a*(v, w) = ∫ ∇v·∇w + γ (x/|x|²·∇v) w`.
fn adjoint_residual(mesh: &Arc<Mesh>, dim: usize, gamma: f64, r0: f64) -> Result<f64> {
    let v = DiscreteFunction::interpolate(mesh, |x| adjoint_solution(norm(x), dim, gamma).0, false);
    let mut r = vec![0.0; mesh.node_count()];
    let mut g = vec![0.0; mesh.field_dim()];
    for c in 0..mesh.cell_count() {
        v.gradient_in_cell(c, &mut g);
        for q in mesh.qp_range(c) {
            let x = mesh.qp_point(q);
            let rr: f64 = x.iter().map(|t| t * t).sum();
            let drift = gamma * dot(x, &g) / rr;
            let w = mesh.qp_weight(q);
            for (a, &node) in mesh.cell(c).iter().enumerate() {
                r[node] += w * (dot(&g, mesh.shape_grad(c, a)) + drift * mesh.qp_shape(q)[a]);
            }
        }
    }
    let mass = RhsFunctional::constant_load(1.0).load_vector(mesh)?;
    let h = mesh.max_cell_size();
    Ok((0..mesh.node_count())
        .filter(|&i| !mesh.is_boundary(i) && mesh.node_radius(i) >= r0 + h)
        .map(|i| r[i].abs() / mass[i])
        .fold(0.0, f64::max))
}

/// Adjoint-solution check and forward blow-up record for the drift problem
/// `−Δu − div(γ u x/|x|²) = −div(x/|x|^{N−γ})` on the unit ball.
pub fn example_nonexistence(
    gamma: f64,
    dim: usize,
    refinements: usize,
    config: &SolveConfig,
) -> Result<CaseResult> {
    let nf = dim as f64;
    if !(nf / 2.0 < gamma + 1.0 && gamma + 1.0 <= nf) {
        return Err(Error::OutOfRange(format!(
            "need N/2 < gamma + 1 <= N (N = {dim}, gamma = {gamma})"
        )));
    }
    let refinements = refinements.max(2);
    let mut res = CaseResult::new(
        "example_nonexistence",
        json!({ "N": dim, "gamma": gamma, "refinements": refinements }),
    );
    let mut adj = Curve::new("adjoint_residual", &["cells", "h", "residual"]);
    let mut errors = Vec::new();
    for k in 0..=refinements {
        let cells = 64usize << k;
        let mesh = Mesh::radial_uniform(dim, 1.0, cells)?;
        let r = adjoint_residual(&mesh, dim, gamma, 0.25)?;
        adj.push(vec![cells as f64, mesh.max_cell_size(), r]);
        errors.push(r);
    }
    res.checks.push(Check::at_least(
        "adjoint_residual_order",
        observed_order(&errors),
        0.9,
        OracleKind::Derived,
    ));
    res.curves.push(adj);

    if !(2.0 < nf) {
        res.notes
            .push("forward problem needs p = 2 < N; skipped".into());
        return Ok(res);
    }
    let field = model_with_inverse_radius_drift(dim, 2.0, gamma)?;
    let flux = VectorCoefficient::radial(ScalarProfile::PowerLaw {
        amplitude: -1.0,
        exponent: 1.0 - nf + gamma,
    });
    let rhs = RhsFunctional::f_field(flux, 2.0);
    let mut fwd = Curve::new(
        "forward",
        &["cells", "h", "diverged", "w1p_norm", "picard_iterations"],
    );
    let mut diverged_any = false;
    let mut norms = Vec::new();
    for k in 0..refinements {
        let cells = 32usize << k;
        let mesh = Mesh::radial_uniform(dim, 1.0, cells)?;
        match resolvent_fixed_point(&field, &rhs, config, &DiscreteFunction::zeros(&mesh)) {
            Ok((u, report)) => {
                let its: usize = report.levels[0]
                    .stages
                    .iter()
                    .map(|s| s.picard_increments.len())
                    .sum();
                let n = norm_w1p(&u, 2.0);
                norms.push(n);
                fwd.push(vec![cells as f64, mesh.max_cell_size(), 0.0, n, its as f64]);
            }
            Err(Error::PicardDiverged {
                iterations,
                last_norm,
                ..
            }) => {
                diverged_any = true;
                fwd.push(vec![
                    cells as f64,
                    mesh.max_cell_size(),
                    1.0,
                    last_norm,
                    iterations as f64,
                ]);
            }
            Err(e @ (Error::Stagnated { .. } | Error::NewtonStalled { .. })) => {
                res.notes.push(format!("{cells} cells: {e}"));
                fwd.push(vec![
                    cells as f64,
                    mesh.max_cell_size(),
                    1.0,
                    f64::NAN,
                    f64::NAN,
                ]);
                diverged_any = true;
            }
            Err(e) => return Err(e),
        }
    }
    let growth = match (norms.first(), norms.last()) {
        (Some(a), Some(b)) if norms.len() >= 2 && *a > 0.0 => b / a,
        _ => f64::NAN,
    };
    res.checks.push(Check::record("norm_growth", growth));
    let proxy = if diverged_any || growth >= 2.0 {
        1.0
    } else {
        0.0
    };
    res.checks.push(Check::record_expecting(
        "blowup_proxy",
        proxy,
        1.0,
        Comparison::AtLeast,
    ));
    res.curves.push(fwd);
    Ok(res)
}

/// First zero squared of `J_{N/2-1}` when known in closed form.
fn continuum_first_eigenvalue(dim: usize) -> Option<f64> {
    match dim {
        2 => Some(2.404_825_557_695_773f64.powi(2)),
        3 => Some(PI * PI),
        _ => None,
    }
}

fn zero_boundary_vec(mesh: &Mesh, v: &mut [f64]) {
    for (i, x) in v.iter_mut().enumerate() {
        if mesh.is_boundary(i) {
            *x = 0.0;
        }
    }
}

fn resonance_mesh(dim: usize, k: usize) -> Result<Arc<Mesh>> {
    if dim == 2 {
        Mesh::unit_disc(4 << k)
    } else {
        Mesh::radial_uniform(dim, 1.0, 16 << k)
    }
}

/// Dirichlet eigenpair by inverse iteration; `M` has zero boundary rows.
pub fn first_eigenpair(
    k: &CsrMatrix,
    m: &CsrMatrix,
    mesh: &Mesh,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let lu = k.lu(None)?;
    let mut x = vec![1.0; k.n()];
    zero_boundary_vec(mesh, &mut x);
    let mut lambda = f64::NAN;
    for _ in 0..10_000 {
        let y = m.mul(&x);
        let mut z = lu.solve(&y)?;
        zero_boundary_vec(mesh, &mut z);
        let mz = dot(&z, &m.mul(&z)).sqrt();
        z.iter_mut().for_each(|v| *v /= mz);
        let new = dot(&z, &k.mul(&z));
        x = z;
        if (new - lambda).abs() <= tol * new.abs() {
            return Ok((new, x));
        }
        lambda = new;
    }
    Err(Error::Stagnated {
        iterations: 10_000,
        last_increment: lambda,
    })
}

/// Extreme singular values of a symmetric matrix on interior nodes.
fn extreme_singular_values(a: &CsrMatrix, mesh: &Mesh) -> Result<(f64, f64)> {
    let n = a.n();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    zero_boundary_vec(mesh, &mut x);
    for _ in 0..500 {
        let mut y = a.mul(&x);
        zero_boundary_vec(mesh, &mut y);
        let s = norm2(&y);
        x = y.iter().map(|v| v / s).collect();
    }
    let mut ax = a.mul(&x);
    zero_boundary_vec(mesh, &mut ax);
    let sigma_max = norm2(&ax);
    let sigma_min = match a.lu(None) {
        Ok(lu) => {
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64 * 0.2).collect();
            zero_boundary_vec(mesh, &mut x);
            for _ in 0..60 {
                let mut y = lu.solve(&x)?;
                zero_boundary_vec(mesh, &mut y);
                let s = norm2(&y);
                if !(s.is_finite() && s > 0.0) {
                    break;
                }
                x = y.iter().map(|v| v / s).collect();
            }
            let mut ax = a.mul(&x);
            zero_boundary_vec(mesh, &mut ax);
            norm2(&ax)
        }
        Err(Error::SingularMatrix { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    Ok((sigma_min, sigma_max))
}

fn mass_without_boundary(mesh: &Mesh) -> CsrMatrix {
    let mut m = mass_matrix(mesh);
    for i in 0..mesh.node_count() {
        if mesh.is_boundary(i) {
            m.set_identity_row_col(i);
            let s = m.pattern().slot(i, i).expect("diagonal slot");
            m.values_mut()[s] = 0.0;
        }
    }
    m
}

fn shifted_operator(k: &CsrMatrix, m: &CsrMatrix, lambda: f64, mesh: &Mesh) -> CsrMatrix {
    let mut a = k.add_scaled(-lambda, m);
    for i in 0..mesh.node_count() {
        if mesh.is_boundary(i) {
            a.set_identity_row_col(i);
        }
    }
    a
}

/// Conjugate gradients for a consistent semidefinite system whose kernel is
/// spanned by `null`; iterates are kept orthogonal to the kernel.
fn projected_cg(a: &CsrMatrix, b: &[f64], null: &[f64], rel_tol: f64, max_iter: usize) -> Vec<f64> {
    let nn = dot(null, null);
    let project = |v: &mut [f64]| {
        let c = dot(v, null) / nn;
        v.iter_mut().zip(null).for_each(|(x, z)| *x -= c * z);
    };
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    project(&mut r);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rel_tol * norm2(b);
    for _ in 0..max_iter {
        if rr.sqrt() <= stop {
            break;
        }
        let ap = a.mul(&p);
        let step = rr / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= step * ai);
        project(&mut r);
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        p.iter_mut()
            .zip(&r)
            .for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    project(&mut x);
    x
}

/// Resonant system `−Δu − λu = w` at the first Dirichlet eigenpair.
pub fn example_resonance(
    dim: usize,
    refinements: usize,
    config: &SolveConfig,
) -> Result<CaseResult> {
    if dim < 2 {
        return Err(Error::InvalidArgument(
            "the resonance case needs N >= 2".into(),
        ));
    }
    let mut res = CaseResult::new(
        "example_resonance",
        json!({ "N": dim, "refinements": refinements }),
    );
    let mut curve = Curve::new(
        "resonance",
        &[
            "nodes",
            "h",
            "lambda_h",
            "sigma_ratio_at_lambda_h",
            "sigma_ratio_at_continuum",
            "orthogonality_defect",
        ],
    );
    let cont = continuum_first_eigenvalue(dim);
    let mut last = None;
    for k in 0..refinements.max(1) {
        let mesh = resonance_mesh(dim, k)?;
        let stiff = stiffness_matrix(&mesh);
        let mass = mass_without_boundary(&mesh);
        let (lambda, w) = first_eigenpair(&stiff, &mass, &mesh, 1e-10)?;
        let (smin, smax) =
            extreme_singular_values(&shifted_operator(&stiff, &mass, lambda, &mesh), &mesh)?;
        let at_cont = match cont {
            Some(l) => {
                let (a, b) =
                    extreme_singular_values(&shifted_operator(&stiff, &mass, l, &mesh), &mesh)?;
                a / b
            }
            None => f64::NAN,
        };
        let mw = mass.mul(&w);
        let defect = dot(&w, &mw).abs() / (norm2(&w) * norm2(&mw));
        curve.push(vec![
            mesh.node_count() as f64,
            mesh.max_cell_size(),
            lambda,
            smin / smax,
            at_cont,
            defect,
        ]);
        last = Some((mesh, stiff, mass, lambda, w, smin / smax));
    }
    let (mesh, stiff, mass, lambda, w, ratio) = last.expect("at least one refinement");
    res.checks.push(Check::at_most(
        "sigma_ratio_at_lambda_h",
        ratio,
        1e-8,
        OracleKind::Derived,
    ));
    if let Some(l) = cont {
        res.checks.push(Check::relative(
            "lambda_h",
            lambda,
            l,
            0.05,
            OracleKind::ClosedForm,
        ));
        if let Some(col) = curve.column("sigma_ratio_at_continuum") {
            res.checks.push(Check::record_expecting(
                "continuum_sigma_ratio_decrease",
                col[col.len() - 1] / col[0],
                1.0,
                Comparison::AtMost,
            ));
        }
    }
    let defect = curve
        .column("orthogonality_defect")
        .and_then(|c| c.last().copied())
        .unwrap_or(f64::NAN);
    res.checks
        .push(Check::record("orthogonality_defect", defect));

    let off = shifted_operator(&stiff, &mass, 0.9 * lambda, &mesh);
    let rhs = mass.mul(&w);
    let u = off.solve(&rhs)?;
    let resid: Vec<f64> = off.mul(&u).iter().zip(&rhs).map(|(a, b)| a - b).collect();
    res.checks.push(Check::at_most(
        "off_spectrum_residual",
        norm2(&resid),
        config.newton_tol,
        OracleKind::Derived,
    ));

    let g = DiscreteFunction::interpolate(&mesh, |x| (1.0 - dot(x, x)) * (1.0 + x[0]), true);
    let mw = mass.mul(&w);
    let c = dot(g.coefficients(), &mw) / dot(&w, &mw);
    let f: Vec<f64> = g
        .coefficients()
        .iter()
        .zip(&w)
        .map(|(a, b)| a - c * b)
        .collect();
    let rhs = mass.mul(&f);
    let at = shifted_operator(&stiff, &mass, lambda, &mesh);
    let u = projected_cg(&at, &rhs, &w, 1e-12, 20 * rhs.len());
    let r: Vec<f64> = at.mul(&u).iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let ls = norm2(&r) / norm2(&rhs);
    res.checks.push(Check::record_expecting(
        "orthogonal_rhs_residual",
        ls,
        1e-6,
        Comparison::AtMost,
    ));
    res.curves.push(curve);
    Ok(res)
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityStage {
    pub exponent: f64,
    pub target: f64,
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `r* = Nr/(N − r)`
pub fn regularity_exponents(dim: usize, p: f64, r: f64) -> (f64, f64, f64) {
    let nf = dim as f64;
    let r_star = nf * r / (nf - r);
    let p_star = sobolev_exponent(dim, p);
    (r_star, p_star, r_star / p_star - 1.0)
}

/// Exponents of the bootstrap stages: `min(r, p*)`, then `s ↦ min(r, s*)`.
pub fn bootstrap_exponents(dim: usize, p: f64, r: f64) -> Vec<f64> {
    let nf = dim as f64;
    let p_star = sobolev_exponent(dim, p);
    let mut s = r.min(p_star);
    let mut out = vec![s];
    while s < r && out.len() < 32 {
        s = (nf * s / (nf - s)).min(r);
        out.push(s);
    }
    out
}

fn regularity_measure(
    u: &DiscreteFunction,
    rhs: &RhsFunctional,
    field: &QuasilinearField,
    s: f64,
) -> Result<RegularityStage> {
    let env = field.envelope();
    let (target, p_star, lambda) = regularity_exponents(env.n, env.p, s);
    let p = env.p;
    let mesh = u.mesh();
    let mut g = vec![0.0; mesh.field_dim()];
    let mut lhs = 0.0;
    for c in 0..mesh.cell_count() {
        u.gradient_in_cell(c, &mut g);
        let gn = norm(&g);
        for q in mesh.qp_range(c) {
            lhs += mesh.qp_weight(q)
                * ((lambda + 1.0) * u.value_at_qp(q).abs().powf(lambda) * gn).powf(p);
        }
    }
    let lhs = lhs.powf(1.0 / p);
    let f = rhs.flux_lr_norm(mesh, s).ok_or_else(|| {
        Error::InvalidArgument("the regularity probe needs a flux right-hand side".into())
    })?;
    let phi = env.sample_phi(mesh)?.lp_norm(s);
    let rhs_value = (f + phi + lp_norm(u, s)).powf(target / p_star);
    let ratio = if lhs == 0.0 && rhs_value == 0.0 {
        0.0
    } else {
        lhs / rhs_value
    };
    Ok(RegularityStage {
        exponent: s,
        target,
        lambda,
        lhs,
        rhs: rhs_value,
        ratio,
    })
}

/// Higher-integrability probe: gates on `dist(b) <= (α^{1/p}/S)(p*/r*)`,
/// solves, and records `‖∇|u|^{r*/p*}‖_p / (‖F‖_r + ‖φ‖_r + ‖u‖_r)^{r*/p*}`
/// on each mesh.
pub fn regularity_probe(
    r: f64,
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    meshes: &[Arc<Mesh>],
    sobolev: &SobolevConstant,
    config: &SolveConfig,
) -> Result<CaseResult> {
    let env = field.envelope();
    let (dim, p) = (env.n, env.p);
    if !(r > p && r < dim as f64) {
        return Err(Error::InvalidArgument(format!(
            "need p < r < N (p = {p}, r = {r}, N = {dim})"
        )));
    }
    let (r_star, p_star, lambda) = regularity_exponents(dim, p, r);
    let factor = p_star / r_star;
    let mut res = CaseResult::new(
        "regularity_probe",
        json!({ "N": dim, "p": p, "r": r, "r_star": r_star, "p_star": p_star, "lambda": lambda, "sobolev": sobolev.value }),
    );
    res.checks.push(Check::record("lambda", lambda));
    res.checks.push(Check::record("delta_factor", factor));
    let mut curve = Curve::new(
        "ratio",
        &["cells", "h", "stage_exponent", "lhs", "rhs", "ratio"],
    );
    let mut finals = Vec::new();
    for mesh in meshes {
        let b = crate::solver::gate_samples(env, mesh)?;
        let gate = choose_truncation_level_with(&b, env.alpha, p, sobolev, factor)?;
        res.checks.push(Check::record(
            &format!("delta_cells{}", mesh.cell_count()),
            gate.threshold,
        ));
        let (u, _) = truncation_continuation(field, rhs, mesh, sobolev, config)?;
        let mut last = None;
        for s in bootstrap_exponents(dim, p, r) {
            let stage = regularity_measure(&u, rhs, field, s)?;
            curve.push(vec![
                mesh.cell_count() as f64,
                mesh.max_cell_size(),
                s,
                stage.lhs,
                stage.rhs,
                stage.ratio,
            ]);
            last = Some(stage.ratio);
        }
        finals.push(last.unwrap_or(0.0));
    }
    let max = finals.iter().cloned().fold(f64::MIN, f64::max);
    let min = finals.iter().cloned().fold(f64::MAX, f64::min);
    let spread = if max == 0.0 { 0.0 } else { (max - min) / max };
    res.checks.push(Check::at_most(
        "ratio_variation",
        spread,
        0.10,
        OracleKind::Derived,
    ));
    res.curves.push(curve);
    Ok(res)
}

/// Regularity probe on the model problem with `b = B/|x|` and the flux
/// `F = x` on the unit ball, across radial meshes of the given sizes.
pub fn regularity_model(
    dim: usize,
    p: f64,
    r: f64,
    amplitude: f64,
    cells: &[usize],
    sobolev_override: Option<f64>,
    config: &SolveConfig,
) -> Result<CaseResult> {
    let field = model_with_inverse_radius_drift(dim, p, amplitude)?;
    let rhs = RhsFunctional::f_field(
        VectorCoefficient::radial(ScalarProfile::PowerLaw {
            amplitude: 1.0,
            exponent: 1.0,
        }),
        p,
    );
    let meshes = cells
        .iter()
        .map(|&n| Mesh::radial_uniform(dim, 1.0, n))
        .collect::<Result<Vec<_>>>()?;
    let finest = meshes
        .last()
        .ok_or_else(|| Error::InvalidArgument("at least one mesh is required".into()))?;
    let sobolev = crate::lorentz::sobolev_constant(dim, p, Some(finest), sobolev_override)?;
    let mut res = regularity_probe(r, &field, &rhs, &meshes, &sobolev, config)?;
    if let Value::Object(m) = &mut res.parameters {
        m.insert("B".into(), json!(amplitude));
        m.insert("cells".into(), json!(cells));
    }
    Ok(res)
}

/// Radius `ρ` of the contact ball for `−Δu = −N`, `u >= ψ` on the unit ball:
/// `u = ψ` on `r <= ρ` and `u(r) = −(1 − r²)/2 + ρ^N ∫_r^1 s^{1-N} ds` beyond,
/// matched in value at `ρ`. Bisection to `1e-10`.
pub fn obstacle_free_boundary(dim: usize, psi: f64) -> Result<f64> {
    if !(psi < 0.0 && psi > -0.5) {
        return Err(Error::InvalidArgument(format!(
            "constant obstacle {psi} must lie in (-1/2, 0)"
        )));
    }
    let g = |rho: f64| obstacle_exact(rho, rho, dim) - psi;
    let (mut lo, mut hi) = (1e-12, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn tail_integral(r: f64, dim: usize) -> f64 {
    if dim == 2 {
        -r.ln()
    } else {
        let e = 2.0 - dim as f64;
        (r.powf(e) - 1.0) / (dim as f64 - 2.0)
    }
}

/// Equation-region branch of the radial obstacle solution.
fn obstacle_exact(r: f64, rho: f64, dim: usize) -> f64 {
    -(1.0 - r * r) / 2.0 + rho.powi(dim as i32) * tail_integral(r, dim)
}

/// Constant-obstacle radial problem against the piecewise oracle.
pub fn obstacle_radial(
    dim: usize,
    psi: f64,
    cells: &[usize],
    config: &SolveConfig,
) -> Result<CaseResult> {
    let rho = obstacle_free_boundary(dim, psi)?;
    let field = laplacian_field(dim, 2.0)?;
    let rhs = RhsFunctional::constant_load(-(dim as f64));
    let mut res = CaseResult::new(
        "obstacle_radial",
        json!({ "N": dim, "psi": psi, "cells": cells, "free_boundary": rho }),
    );
    let mut curve = Curve::new(
        "errors",
        &[
            "cells",
            "h",
            "free_boundary_h",
            "free_boundary_error",
            "w1p_error",
            "min_slack",
        ],
    );
    let nf = dim as f64;
    let mut errors = Vec::new();
    let mut worst_fb = f64::NEG_INFINITY;
    let mut worst_slack = f64::INFINITY;
    let mut last_mesh = None;
    for &n in cells {
        let mesh = Mesh::radial_uniform(dim, 1.0, n)?;
        let h = mesh.max_cell_size();
        let obstacle = Obstacle::constant(&mesh, psi)?;
        let zero = DiscreteFunction::zeros(&mesh);
        let u = vi_frozen_solve(&field, &zero, &rhs, &obstacle, config)?;
        let contact = obstacle.contact_set(&u, 1e-10);
        let rho_h = contact
            .iter()
            .map(|&i| mesh.node_radius(i))
            .fold(0.0, f64::max);
        let err = gradient_error(
            &u,
            |x, out| {
                let r = norm(x);
                out.iter_mut().for_each(|o| *o = 0.0);
                if r > rho {
                    let slope = r - rho.powf(nf) * r.powf(1.0 - nf);
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = slope * xi / r;
                    }
                }
            },
            2.0,
        );
        let probes = probe_family(&u, &obstacle, 50, &[0.1, 1.0, 10.0], 5)?;
        let comp = complementarity_residual_frozen(&u, &zero, &obstacle, &field, &rhs, &probes)?;
        curve.push(vec![
            n as f64,
            h,
            rho_h,
            (rho_h - rho).abs(),
            err,
            comp.min_slack,
        ]);
        worst_fb = worst_fb.max((rho_h - rho).abs() / h);
        worst_slack = worst_slack.min(comp.min_slack);
        errors.push(err);
        last_mesh = Some(mesh);
    }
    res.checks.push(Check::at_most(
        "free_boundary_error_over_h",
        worst_fb,
        2.0,
        OracleKind::Derived,
    ));
    res.checks.push(Check::at_least(
        "w1p_order",
        observed_order(&errors),
        0.9,
        OracleKind::Derived,
    ));
    res.checks.push(Check::at_least(
        "min_slack",
        worst_slack,
        -config.vi_tol,
        OracleKind::Derived,
    ));
    let mesh = last_mesh.expect("at least one mesh");
    let zero = DiscreteFunction::zeros(&mesh);
    let vi = vi_frozen_solve(&field, &zero, &rhs, &Obstacle::unconstrained(&mesh), config)?;
    let eq = frozen_solve(&field, &zero, &rhs, config)?;
    res.checks.push(Check::at_most(
        "unconstrained_agreement",
        w1p_distance(&vi, &eq, 2.0)?,
        10.0 * config.newton_tol,
        OracleKind::Derived,
    ));
    res.curves.push(curve);
    Ok(res)
}
