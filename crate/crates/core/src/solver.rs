//! Frozen-coefficient Newton solves, the resolvent fixed-point iteration with
//! continuation fallback, and the outer truncation-level loop.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{
    norm_w1p, stiffness_matrix, DiscreteFunction, FrozenProblem, RhsFunctional,
};
use crate::error::{Error, Result};
use crate::linalg::{norm2, BandedLu, CsrMatrix};
use crate::lorentz::SobolevConstant;
use crate::mesh::Mesh;
use crate::obstacle::{projected_newton, Obstacle};
use crate::structural::{
    choose_truncation_level, truncate_field, EvalPoint, QuasilinearField, StructuralEnvelope,
    TruncationChoice,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Damping {
    pub shrink: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for Damping {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Threshold on the Euclidean norm of the nodal residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub damping: Damping,
    /// Threshold on `‖u_{k+1} - u_k‖_{W^{1,p}}`.
    pub picard_tol: f64,
    pub max_picard: usize,
    pub relaxation: f64,
    /// Anderson mixing depth; 0 disables acceleration.
    pub anderson_depth: usize,
    pub continuation_steps: Vec<f64>,
    pub truncation_schedule: Vec<u64>,
    pub sigma_grid: Option<Vec<f64>>,
    /// Monitor entries with `C_est` above the cap are flagged.
    pub monitor_cap: f64,
    /// Growth of `‖u_k‖` beyond this factor of `‖u_1‖` counts as divergence.
    pub divergence_factor: f64,
    /// Increments not shrinking over this many iterations count as stagnation.
    pub stagnation_window: usize,
    /// Finish fixed-point solves with Newton on the coupled residual.
    pub polish: bool,
    /// Admissible floor on the normalized variational-inequality slack.
    pub vi_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 100,
            damping: Damping::default(),
            picard_tol: 1e-9,
            max_picard: 200,
            relaxation: 1.0,
            anderson_depth: 0,
            continuation_steps: vec![0.25, 0.5, 0.75, 1.0],
            truncation_schedule: (0..24).map(|k| 1u64 << k).collect(),
            sigma_grid: None,
            monitor_cap: 1e6,
            divergence_factor: 1e3,
            stagnation_window: 25,
            polish: true,
            vi_tol: 1e-8,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("picard_tol", self.picard_tol),
            ("monitor_cap", self.monitor_cap),
            ("vi_tol", self.vi_tol),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.divergence_factor > 1.0) {
            return bad(format!(
                "divergence_factor = {} must exceed 1",
                self.divergence_factor
            ));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return bad(format!(
                "relaxation = {} must lie in (0, 1]",
                self.relaxation
            ));
        }
        if !(self.damping.shrink > 0.0
            && self.damping.shrink < 1.0
            && self.damping.armijo > 0.0
            && self.damping.armijo < 1.0)
        {
            return bad("damping parameters must lie in (0, 1)".into());
        }
        let t = &self.continuation_steps;
        if t.is_empty() || *t.last().unwrap() != 1.0 || t.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return bad("continuation_steps must lie in (0, 1] and end at 1".into());
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("continuation_steps must be strictly increasing".into());
        }
        let s = &self.truncation_schedule;
        if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return bad("truncation_schedule must be strictly increasing positive levels".into());
        }
        if let Some(g) = &self.sigma_grid {
            if g.is_empty() || g.iter().any(|v| !(*v > 0.0)) {
                return bad("sigma_grid levels must be positive".into());
            }
        }
        if self.max_newton == 0 || self.max_picard == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
    pub gradient_steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    /// Continuation parameter of `u = tF(u)`.
    pub t: f64,
    pub newton_iterations: Vec<usize>,
    pub final_residual: f64,
    pub picard_increments: Vec<f64>,
    pub w1p_norms: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonitorEntry {
    pub sigma: f64,
    /// `∫_{|u|<=σ} |∇u|^p`
    pub lhs: f64,
    /// `∫_{|u|<=σ} |u|^p`
    pub rhs: f64,
    pub c_est: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub level: Option<u64>,
    pub stages: Vec<StageReport>,
    pub fell_back_to_continuation: bool,
    /// Coupled residual `‖R(u; u)‖` of the returned iterate.
    pub final_residual: f64,
    pub w1p_norm: f64,
    pub monitor: Vec<MonitorEntry>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveFlags {
    pub converged: bool,
    pub stagnated: bool,
    pub blowup_suspected: bool,
    /// `max ‖u_n‖` grew by 5% or more over the last two levels.
    pub bound_growing: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveReport {
    pub truncation: Option<TruncationChoice>,
    pub levels: Vec<LevelReport>,
    /// `‖u_{n+1} - u_n‖_{W^{1,p}}` between consecutive levels.
    pub level_differences: Vec<f64>,
    /// `∫⟨A_n(x,u_n,∇u_n) - A_n(x,u_n,∇u_{n+1}), ∇arctan(u_n - u_{n+1})⟩` per level pair.
    pub gamma_diagnostic: Vec<f64>,
    /// `max_n ‖u_n‖_{W^{1,p}}`
    pub uniform_bound: Option<f64>,
    pub flags: SolveFlags,
}

impl SolveReport {
    /// Relative spread of `C_est` between the last two levels, taking the
    /// largest over the shared `σ` entries.
    pub fn monitor_variation(&self) -> Option<f64> {
        let n = self.levels.len();
        if n < 2 {
            return None;
        }
        let (a, b) = (&self.levels[n - 2].monitor, &self.levels[n - 1].monitor);
        let max_a = a.iter().fold(0.0_f64, |m, e| m.max(e.c_est));
        let max_b = b.iter().fold(0.0_f64, |m, e| m.max(e.c_est));
        if max_a == 0.0 && max_b == 0.0 {
            return Some(0.0);
        }
        Some((max_a - max_b).abs() / max_a.max(max_b))
    }

    pub fn write_json<W: std::io::Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Rows `level, t, iteration, increment, w1p_norm`.
    pub fn write_history_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["level", "t", "iteration", "increment", "w1p_norm"])?;
        for level in &self.levels {
            let name = level
                .level
                .map_or_else(|| "none".to_string(), |l| l.to_string());
            for stage in &level.stages {
                for (k, (inc, norm)) in stage
                    .picard_increments
                    .iter()
                    .zip(&stage.w1p_norms)
                    .enumerate()
                {
                    w.write_record([
                        name.clone(),
                        format!("{}", stage.t),
                        k.to_string(),
                        format!("{inc:e}"),
                        format!("{norm:e}"),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn residual_of(
    problem: &FrozenProblem,
    u: &DiscreteFunction,
    coupled: bool,
) -> Result<Vec<f64>> {
    if coupled {
        problem.coupled_residual(u)
    } else {
        problem.residual(u)
    }
}

pub(crate) fn jacobian_of(
    problem: &FrozenProblem,
    u: &DiscreteFunction,
    coupled: bool,
) -> Result<CsrMatrix> {
    if coupled {
        problem.coupled_jacobian(u)
    } else {
        problem.jacobian(u)
    }
}

pub(crate) fn step(u: &DiscreteFunction, d: &[f64], tau: f64) -> DiscreteFunction {
    let coeffs = u
        .coefficients()
        .iter()
        .zip(d)
        .map(|(a, b)| a + tau * b)
        .collect();
    DiscreteFunction::from_coefficients(u.mesh(), coeffs, u.zero_boundary())
        .expect("boundary rows keep zero steps")
}

/// Backtracking on `‖R‖₂`; returns the accepted iterate and its residual,
/// or `None` if no trial step decreased the residual.
fn line_search(
    problem: &FrozenProblem,
    u: &DiscreteFunction,
    d: &[f64],
    rn: f64,
    cfg: &SolveConfig,
    coupled: bool,
) -> Result<Option<(DiscreteFunction, Vec<f64>, f64)>> {
    let mut tau = 1.0;
    let mut best: Option<(DiscreteFunction, Vec<f64>, f64)> = None;
    for _ in 0..=cfg.damping.max_halvings {
        let trial = step(u, d, tau);
        let r = residual_of(problem, &trial, coupled)?;
        let n = norm2(&r);
        if n.is_finite() {
            if n <= (1.0 - cfg.damping.armijo * tau) * rn {
                return Ok(Some((trial, r, n)));
            }
            if best.as_ref().is_none_or(|b| n < b.2) {
                best = Some((trial, r, n));
            }
        }
        tau *= cfg.damping.shrink;
    }
    Ok(best.filter(|b| b.2 < rn))
}

/// Newton steps reducing the residual by less than this factor also try the
/// stiffness-preconditioned direction.
const SLOW_PROGRESS: f64 = 0.9;

/// Damped step along `K^{-1}(−r)` over a few scales.
fn laplacian_step(
    problem: &FrozenProblem,
    stiffness: &BandedLu,
    u: &DiscreteFunction,
    r: &[f64],
    rn: f64,
    cfg: &SolveConfig,
    coupled: bool,
) -> Result<Option<(DiscreteFunction, Vec<f64>, f64)>> {
    let neg: Vec<f64> = r.iter().map(|v| -v).collect();
    let Ok(d) = stiffness.solve(&neg) else {
        return Ok(None);
    };
    for scale in [1.0, 1e-2, 1e2, 1e-4, 1e4] {
        let d: Vec<f64> = d.iter().map(|v| v * scale).collect();
        if let Some(found) = line_search(problem, u, &d, rn, cfg, coupled)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

/// Damped Newton on the frozen (or coupled) residual.
pub(crate) fn newton(
    problem: &FrozenProblem,
    u0: DiscreteFunction,
    cfg: &SolveConfig,
    coupled: bool,
) -> Result<(DiscreteFunction, NewtonStats)> {
    let mut u = u0;
    let mut r = residual_of(problem, &u, coupled)?;
    let mut rn = norm2(&r);
    let mut stats = NewtonStats::default();
    if !rn.is_finite() {
        return Err(Error::NewtonStalled {
            iterations: 0,
            residual: rn,
        });
    }
    let stiffness = stiffness_matrix(problem.mesh()).lu(None)?;
    // A flat start makes degenerate or singular weights dominate the
    // Jacobian; a Laplacian step gives the iteration a nonzero gradient.
    if u.max_abs() == 0.0 && rn > cfg.newton_tol {
        if let Some((nu, nr, nn)) = laplacian_step(problem, &stiffness, &u, &r, rn, cfg, coupled)? {
            u = nu;
            r = nr;
            rn = nn;
        }
    }
    let mut polished = false;
    while stats.iterations < cfg.max_newton {
        if rn <= cfg.newton_tol && polished {
            break;
        }
        let converged = rn <= cfg.newton_tol;
        stats.iterations += 1;
        let jac = jacobian_of(problem, &u, coupled)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = match jac.solve(&neg) {
            Ok(d) => d,
            Err(Error::SingularMatrix { .. }) => {
                stats.gradient_steps += 1;
                jac.mul_transpose(&neg)
            }
            Err(e) => return Err(e),
        };
        if converged {
            // one extra full step past the tolerance
            polished = true;
            let trial = step(&u, &d, 1.0);
            let tr = residual_of(problem, &trial, coupled)?;
            let tn = norm2(&tr);
            if tn <= rn.max(cfg.newton_tol) {
                u = trial;
                r = tr;
                rn = tn;
            }
            continue;
        }
        let mut candidate = line_search(problem, &u, &d, rn, cfg, coupled)?;
        if candidate.as_ref().is_none_or(|c| c.2 > SLOW_PROGRESS * rn) {
            if let Some(alt) = laplacian_step(problem, &stiffness, &u, &r, rn, cfg, coupled)? {
                if candidate.as_ref().is_none_or(|c| alt.2 < c.2) {
                    stats.gradient_steps += 1;
                    candidate = Some(alt);
                }
            }
        }
        match candidate {
            Some((nu, nr, nn)) => {
                u = nu;
                r = nr;
                rn = nn;
            }
            None => {
                stats.residual = rn;
                return Err(Error::NewtonStalled {
                    iterations: stats.iterations,
                    residual: rn,
                });
            }
        }
    }
    stats.residual = rn;
    if rn <= cfg.newton_tol {
        Ok((u, stats))
    } else {
        Err(Error::NewtonStalled {
            iterations: stats.iterations,
            residual: rn,
        })
    }
}

fn check_same_mesh(a: &DiscreteFunction, b: &DiscreteFunction) -> Result<()> {
    if a.same_mesh(b) {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

/// Solves `−div A(x, v, ∇u) = Φ` from a zero start.
pub fn frozen_solve(
    field: &QuasilinearField,
    v: &DiscreteFunction,
    rhs: &RhsFunctional,
    config: &SolveConfig,
) -> Result<DiscreteFunction> {
    frozen_solve_from(field, v, rhs, config, &DiscreteFunction::zeros(v.mesh())).map(|(u, _)| u)
}

pub fn frozen_solve_from(
    field: &QuasilinearField,
    v: &DiscreteFunction,
    rhs: &RhsFunctional,
    config: &SolveConfig,
    u0: &DiscreteFunction,
) -> Result<(DiscreteFunction, NewtonStats)> {
    config.validate()?;
    check_same_mesh(v, u0)?;
    let problem = FrozenProblem::new(field, v, rhs)?;
    newton(&problem, zero_on_boundary(u0)?, config, false)
}

fn zero_on_boundary(u: &DiscreteFunction) -> Result<DiscreteFunction> {
    if u.zero_boundary() {
        return Ok(u.clone());
    }
    let mesh = u.mesh().clone();
    u.map_nodal(|i, v| if mesh.is_boundary(i) { 0.0 } else { v }, true)
}

/// Newton on the coupled residual `R(u; u)`.
pub fn coupled_solve(
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    config: &SolveConfig,
    u0: &DiscreteFunction,
) -> Result<(DiscreteFunction, NewtonStats)> {
    let problem = FrozenProblem::new(field, u0, rhs)?;
    newton(&problem, zero_on_boundary(u0)?, config, true)
}

/// `‖R(u; u)‖₂`
pub fn coupled_residual_norm(
    field: &QuasilinearField,
    u: &DiscreteFunction,
    rhs: &RhsFunctional,
) -> Result<f64> {
    Ok(norm2(
        &FrozenProblem::new(field, u, rhs)?.coupled_residual(u)?,
    ))
}

enum StageOutcome {
    Converged(DiscreteFunction),
    Stagnated,
}

struct Resolvent<'a> {
    field: &'a QuasilinearField,
    load: Vec<f64>,
    config: &'a SolveConfig,
    obstacle: Option<&'a Obstacle>,
}

impl Resolvent<'_> {
    fn apply(
        &self,
        v: &DiscreteFunction,
        warm: &DiscreteFunction,
    ) -> Result<(DiscreteFunction, NewtonStats)> {
        let problem = FrozenProblem::with_load(self.field, v, self.load.clone())?;
        self.inner(&problem, warm.clone(), false)
    }

    fn inner(
        &self,
        problem: &FrozenProblem,
        u0: DiscreteFunction,
        coupled: bool,
    ) -> Result<(DiscreteFunction, NewtonStats)> {
        match self.obstacle {
            Some(obs) => projected_newton(problem, u0, obs, self.config, coupled),
            None => newton(problem, u0, self.config, coupled),
        }
    }
}

/// Anderson mixing of the last iterates for `u ↦ g(u)`.
struct Anderson {
    depth: usize,
    us: Vec<Vec<f64>>,
    gs: Vec<Vec<f64>>,
}

impl Anderson {
    fn mix(&mut self, u: &[f64], g: &[f64]) -> Vec<f64> {
        self.us.push(u.to_vec());
        self.gs.push(g.to_vec());
        if self.us.len() > self.depth + 1 {
            self.us.remove(0);
            self.gs.remove(0);
        }
        let m = self.us.len();
        if m < 2 {
            return g.to_vec();
        }
        let f: Vec<Vec<f64>> = (0..m)
            .map(|k| {
                self.gs[k]
                    .iter()
                    .zip(&self.us[k])
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        let last = &f[m - 1];
        let df: Vec<Vec<f64>> = (0..m - 1)
            .map(|k| f[k + 1].iter().zip(&f[k]).map(|(a, b)| a - b).collect())
            .collect();
        let k = m - 1;
        let mut a = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                a[i][j] = crate::linalg::dot(&df[i], &df[j]);
            }
            a[i][i] *= 1.0 + 1e-10;
            rhs[i] = crate::linalg::dot(&df[i], last);
        }
        let Some(gamma) = solve_small(a, rhs) else {
            return g.to_vec();
        };
        let mut out = g.to_vec();
        for (j, gj) in gamma.iter().enumerate() {
            for i in 0..out.len() {
                out[i] -= gj * (self.gs[j + 1][i] - self.gs[j][i]);
            }
        }
        out
    }
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        x[k] = (b[k] - (k + 1..n).map(|j| a[k][j] * x[j]).sum::<f64>()) / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Relaxed iteration `u ← (1-ω) u + ω t F(u)`.
fn fixed_point_stage(
    res: &Resolvent,
    t: f64,
    u0: &DiscreteFunction,
    relaxation: f64,
    report: &mut StageReport,
) -> Result<StageOutcome> {
    let cfg = res.config;
    let p = res.field.p();
    let mut u = u0.clone();
    let mut warm = u0.clone();
    let mut anderson = (cfg.anderson_depth > 0).then(|| Anderson {
        depth: cfg.anderson_depth,
        us: Vec::new(),
        gs: Vec::new(),
    });
    let mut reference: Option<f64> = None;
    for _ in 0..cfg.max_picard {
        let (fu, stats) = res.apply(&u, &warm)?;
        report.newton_iterations.push(stats.iterations);
        report.final_residual = stats.residual;
        warm = fu.clone();
        let target: Vec<f64> = u
            .coefficients()
            .iter()
            .zip(fu.coefficients())
            .map(|(a, b)| (1.0 - relaxation) * a + relaxation * t * b)
            .collect();
        let next = match anderson.as_mut() {
            Some(acc) => acc.mix(u.coefficients(), &target),
            None => target,
        };
        let next = DiscreteFunction::from_coefficients(u.mesh(), next, true)?;
        let inc = norm_w1p(&next.sub(&u)?, p);
        let size = norm_w1p(&next, p);
        report.picard_increments.push(inc);
        report.w1p_norms.push(size);
        let base = *reference.get_or_insert(size.max(1e-300));
        if !size.is_finite()
            || size > cfg.divergence_factor * base.max(f64::MIN_POSITIVE) && size > 1e-12
        {
            return Err(Error::PicardDiverged {
                iterations: report.picard_increments.len(),
                initial_norm: base,
                last_norm: size,
                norm_history: report.w1p_norms.clone(),
            });
        }
        u = next;
        if inc < cfg.picard_tol {
            report.converged = true;
            return Ok(StageOutcome::Converged(u));
        }
        let k = report.picard_increments.len();
        if k > cfg.stagnation_window
            && inc >= 0.99 * report.picard_increments[k - 1 - cfg.stagnation_window]
        {
            return Ok(StageOutcome::Stagnated);
        }
    }
    Ok(StageOutcome::Stagnated)
}

fn new_stage(t: f64) -> StageReport {
    StageReport {
        t,
        newton_iterations: Vec::new(),
        final_residual: f64::NAN,
        picard_increments: Vec::new(),
        w1p_norms: Vec::new(),
        converged: false,
    }
}

/// Fixed point of the resolvent `F: v ↦ u`, `−div A(x, v, ∇u) = Φ`.
///
/// Relaxed Picard iteration first; on stagnation, continuation along
/// `u = tF(u)` over the configured `t`-grid. Converged iterates are finished
/// by Newton on the coupled residual when `polish` is set.
pub fn resolvent_fixed_point(
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    config: &SolveConfig,
    u0: &DiscreteFunction,
) -> Result<(DiscreteFunction, SolveReport)> {
    let (u, level) = fixed_point_level(field, rhs, config, u0, None, None)?;
    let mut report = SolveReport {
        uniform_bound: Some(level.w1p_norm),
        ..Default::default()
    };
    report.flags.converged = true;
    report.flags.stagnated = level.fell_back_to_continuation;
    report.levels.push(level);
    Ok((u, report))
}

pub(crate) fn fixed_point_level(
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    config: &SolveConfig,
    u0: &DiscreteFunction,
    level: Option<u64>,
    obstacle: Option<&Obstacle>,
) -> Result<(DiscreteFunction, LevelReport)> {
    config.validate()?;
    let mesh = u0.mesh().clone();
    let load = rhs.load_vector(&mesh)?;
    let res = Resolvent {
        field,
        load: load.clone(),
        config,
        obstacle,
    };
    let u0 = zero_on_boundary(u0)?;
    let u0 = match obstacle {
        Some(obs) => obs.project(&u0)?,
        None => u0,
    };
    let mut stages = Vec::new();
    let mut fell_back = false;

    let u = if field.ignores_u() {
        let mut stage = new_stage(1.0);
        let (u, stats) = res.apply(&u0, &u0)?;
        stage.newton_iterations.push(stats.iterations);
        stage.final_residual = stats.residual;
        stage
            .picard_increments
            .push(norm_w1p(&u.sub(&u0)?, field.p()));
        stage.w1p_norms.push(norm_w1p(&u, field.p()));
        stage.converged = true;
        stages.push(stage);
        u
    } else {
        let mut stage = new_stage(1.0);
        let outcome = fixed_point_stage(&res, 1.0, &u0, config.relaxation, &mut stage);
        stages.push(stage);
        match outcome? {
            StageOutcome::Converged(u) => u,
            StageOutcome::Stagnated => {
                fell_back = true;
                let mut u = u0.clone();
                let relaxation = config.relaxation.min(0.5);
                for &t in &config.continuation_steps {
                    let mut stage = new_stage(t);
                    let outcome = fixed_point_stage(&res, t, &u, relaxation, &mut stage);
                    let iterations = stage.picard_increments.len();
                    let last_increment =
                        stage.picard_increments.last().copied().unwrap_or(f64::NAN);
                    stages.push(stage);
                    match outcome? {
                        StageOutcome::Converged(next) => u = next,
                        StageOutcome::Stagnated => {
                            return Err(Error::Stagnated {
                                iterations,
                                last_increment,
                            })
                        }
                    }
                }
                u
            }
        }
    };

    let mut u = u;
    let problem = FrozenProblem::with_load(field, &u, load)?;
    if config.polish && !field.ignores_u() {
        if let Ok((polished, _)) = res.inner(&problem, u.clone(), true) {
            u = polished;
        }
    }
    let final_residual = norm2(&problem.coupled_residual(&u)?);
    let w1p_norm = norm_w1p(&u, field.p());
    let monitor = apriori_monitor(
        &u,
        field.envelope(),
        config.sigma_grid.as_deref(),
        config.monitor_cap,
    );
    Ok((
        u,
        LevelReport {
            level,
            stages,
            fell_back_to_continuation: fell_back,
            final_residual,
            w1p_norm,
            monitor,
        },
    ))
}

/// `8` log-spaced levels over `[1e-3, 1]·max|u|`.
pub fn default_sigma_grid(u: &DiscreteFunction) -> Vec<f64> {
    let top = if u.max_abs() > 0.0 { u.max_abs() } else { 1.0 };
    (0..8)
        .map(|k| top * 10f64.powf(-3.0 + 3.0 * k as f64 / 7.0))
        .collect()
}

/// Both sides of `‖∇u‖^p_{L^p(Ω∖Ω_σ)} <= C (1 + ‖u‖^p_{L^p(Ω∖Ω_σ)})`,
/// with `Ω∖Ω_σ = {|u| <= σ}`, and `C_est = lhs / (1 + rhs)`.
pub fn apriori_monitor(
    u: &DiscreteFunction,
    envelope: &StructuralEnvelope,
    sigma_grid: Option<&[f64]>,
    cap: f64,
) -> Vec<MonitorEntry> {
    let p = envelope.p;
    let grid = sigma_grid.map_or_else(|| default_sigma_grid(u), <[f64]>::to_vec);
    let mesh = u.mesh();
    let mut g = vec![0.0; mesh.field_dim()];
    let samples: Vec<(f64, f64, f64)> = (0..mesh.cell_count())
        .flat_map(|c| {
            u.gradient_in_cell(c, &mut g);
            let grad = crate::profile::norm(&g).powf(p);
            mesh.qp_range(c)
                .map(|q| (u.value_at_qp(q).abs(), mesh.qp_weight(q), grad))
                .collect::<Vec<_>>()
        })
        .collect();
    grid.iter()
        .map(|&sigma| {
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for &(v, w, grad) in &samples {
                if v <= sigma {
                    lhs += w * grad;
                    rhs += w * v.powf(p);
                }
            }
            let c_est = lhs / (1.0 + rhs);
            MonitorEntry {
                sigma,
                lhs,
                rhs,
                c_est,
                flagged: c_est > cap,
            }
        })
        .collect()
}

/// `∫⟨A(x,v,∇u) − A(x,v,∇u_*), ∇(u − u_*)⟩ / (1 + (u − u_*)²)` with `v = u`.
pub fn arctan_pairing(
    field: &QuasilinearField,
    u: &DiscreteFunction,
    u_star: &DiscreteFunction,
) -> Result<f64> {
    check_same_mesh(u, u_star)?;
    let mesh = u.mesh();
    let dim = mesh.field_dim();
    let (mut gu, mut gs, mut a1, mut a2) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let mut total = 0.0;
    for c in 0..mesh.cell_count() {
        u.gradient_in_cell(c, &mut gu);
        u_star.gradient_in_cell(c, &mut gs);
        for q in mesh.qp_range(c) {
            let pt = EvalPoint {
                x: mesh.qp_point(q),
                qp: Some(q),
            };
            let v = u.value_at_qp(q);
            let d = v - u_star.value_at_qp(q);
            field.evaluator().eval(&pt, v, &gu, &mut a1)?;
            field.evaluator().eval(&pt, v, &gs, &mut a2)?;
            let pairing: f64 = (0..dim).map(|i| (a1[i] - a2[i]) * (gu[i] - gs[i])).sum();
            total += mesh.qp_weight(q) * pairing / (1.0 + d * d);
        }
    }
    Ok(total)
}

/// Truncation scheme: solve `−div A_n(x, u_n, ∇u_n) = Φ` along the schedule
/// from the level chosen by the distance condition, warm-starting each level,
/// until consecutive levels agree to `picard_tol` in `W^{1,p}`.
pub fn truncation_continuation(
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    mesh: &Arc<Mesh>,
    sobolev: &SobolevConstant,
    config: &SolveConfig,
) -> Result<(DiscreteFunction, SolveReport)> {
    let rhs_fn = |f: &QuasilinearField, u: &DiscreteFunction, level: u64| {
        fixed_point_level(f, rhs, config, u, Some(level), None)
    };
    truncation_loop(field, mesh, sobolev, config, rhs_fn)
}

/// Samples of `b` used for the distance condition. On radial meshes `b` is
/// sampled on a geometrically graded quadrature reaching `10^{-6} R`, so that
/// a coarse solve mesh does not hide the singular part of `b`.
pub fn gate_samples(
    env: &StructuralEnvelope,
    mesh: &Mesh,
) -> Result<crate::lorentz::SampledScalarField> {
    match *mesh.kind() {
        crate::mesh::MeshKind::Radial { dim, radius } => env.sample_b(&*Mesh::radial_graded_ratio(
            dim,
            radius,
            1e-6 * radius,
            1.001,
        )?),
        crate::mesh::MeshKind::Planar => env.sample_b(mesh),
    }
}

pub(crate) fn truncation_loop(
    field: &QuasilinearField,
    mesh: &Arc<Mesh>,
    sobolev: &SobolevConstant,
    config: &SolveConfig,
    mut solve_level: impl FnMut(
        &QuasilinearField,
        &DiscreteFunction,
        u64,
    ) -> Result<(DiscreteFunction, LevelReport)>,
) -> Result<(DiscreteFunction, SolveReport)> {
    config.validate()?;
    let env = field.envelope();
    let b = gate_samples(env, mesh)?;
    let max_b = env.sample_b(mesh)?.max_abs();
    let choice = choose_truncation_level(&b, env.alpha, env.p, sobolev)?;
    let mut levels: Vec<u64> = config
        .truncation_schedule
        .iter()
        .copied()
        .filter(|&n| n >= choice.level)
        .collect();
    if levels.first() != Some(&choice.level) {
        levels.insert(0, choice.level);
    }
    let p = env.p;
    let mut report = SolveReport {
        truncation: Some(choice),
        ..Default::default()
    };
    let mut u = DiscreteFunction::zeros(mesh);
    let mut prev: Option<(DiscreteFunction, QuasilinearField)> = None;
    let mut norms: Vec<f64> = Vec::new();
    for &n in &levels {
        let field_n = truncate_field(field, n)?;
        let (un, level_report) = solve_level(&field_n, &u, n)?;
        norms.push(level_report.w1p_norm);
        report.levels.push(level_report);
        let mut done = (n as f64) >= max_b;
        if let Some((u_prev, field_prev)) = &prev {
            let diff = norm_w1p(&un.sub(u_prev)?, p);
            report.level_differences.push(diff);
            report
                .gamma_diagnostic
                .push(arctan_pairing(field_prev, u_prev, &un)?);
            done |= diff < config.picard_tol;
        }
        u = un.clone();
        prev = Some((un, field_n));
        if done {
            report.flags.converged = true;
            break;
        }
    }
    let bound = norms.iter().fold(0.0_f64, |m, v| m.max(*v));
    report.uniform_bound = Some(bound);
    if norms.len() >= 2 {
        let (a, b) = (norms[norms.len() - 2], norms[norms.len() - 1]);
        report.flags.bound_growing = b > 1.05 * a && a > 0.0;
    }
    report.flags.stagnated = report.levels.iter().any(|l| l.fell_back_to_continuation);
    if !report.flags.converged {
        return Err(Error::SchemeNotCauchy {
            levels: report.levels.len(),
            last_difference: report.level_differences.last().copied().unwrap_or(f64::NAN),
        });
    }
    Ok((u, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeCheck {
    pub probes: usize,
    /// `max |∫⟨A,∇w⟩ − ⟨Φ,w⟩| / ‖w‖_{W^{1,p}}`
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Smooth random test function vanishing on the boundary nodes.
pub fn random_test_function(mesh: &Arc<Mesh>, rng: &mut ChaCha8Rng) -> DiscreteFunction {
    let dim = mesh.field_dim();
    let scale = 1.0 / mesh.inscribed_radius().max(1e-12);
    let modes: Vec<(f64, Vec<f64>, f64)> = (0..4)
        .map(|_| {
            let amp = rng.random_range(-1.0..1.0);
            let freq: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-4.0..4.0) * scale)
                .collect();
            (amp, freq, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    DiscreteFunction::interpolate(
        mesh,
        |x| {
            modes
                .iter()
                .map(|(a, k, ph)| {
                    a * (k.iter().zip(x).map(|(ki, xi)| ki * xi).sum::<f64>() + ph).cos()
                })
                .sum()
        },
        true,
    )
}

/// Weak-form defect of `u` against random smooth test functions.
pub fn weak_form_probes(
    field: &QuasilinearField,
    u: &DiscreteFunction,
    rhs: &RhsFunctional,
    count: usize,
    seed: u64,
) -> Result<ProbeCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let residual = FrozenProblem::new(field, u, rhs)?.full_residual(u)?;
    let p = field.p();
    let mut ratios = Vec::with_capacity(count);
    for _ in 0..count {
        let w = random_test_function(u.mesh(), &mut rng);
        let defect: f64 = residual
            .iter()
            .zip(w.coefficients())
            .map(|(a, b)| a * b)
            .sum();
        let size = norm_w1p(&w, p);
        ratios.push(if size > 0.0 { defect.abs() / size } else { 0.0 });
    }
    Ok(ProbeCheck {
        probes: count,
        max_ratio: ratios.iter().fold(0.0, |m, v| m.max(*v)),
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{Coefficient, ScalarProfile, VectorCoefficient};
    use crate::structural::ModelData;

    fn model(dim: usize, p: f64, drift: Option<f64>) -> QuasilinearField {
        let mut data = ModelData::p_laplacian(dim, p);
        let mut b = Coefficient::zero();
        if let Some(amp) = drift {
            data = data.with_drift(VectorCoefficient::radial(ScalarProfile::InverseRadius {
                amplitude: amp,
            }));
            b = Coefficient::inverse_radius(amp);
        }
        QuasilinearField::model(data, b, Coefficient::zero()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::default().validate().is_ok());
        let bad = SolveConfig {
            continuation_steps: vec![0.5, 0.9],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolveConfig {
            truncation_schedule: vec![1, 4, 2],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn laplacian_manufactured_solution() {
        let mesh = Mesh::radial_uniform(3, 1.0, 64).unwrap();
        let field = model(3, 2.0, None);
        let v = DiscreteFunction::zeros(&mesh);
        let u = frozen_solve(
            &field,
            &v,
            &RhsFunctional::constant_load(3.0),
            &SolveConfig::default(),
        )
        .unwrap();
        let err = (0..mesh.node_count())
            .map(|i| (u.coefficients()[i] - (1.0 - mesh.node(i)[0].powi(2)) / 2.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn p3_solve_converges_from_zero() {
        let mesh = Mesh::radial_uniform(4, 1.0, 64).unwrap();
        let field = model(4, 3.0, None);
        let v = DiscreteFunction::zeros(&mesh);
        let cfg = SolveConfig::default();
        let u = frozen_solve(&field, &v, &RhsFunctional::constant_load(1.0), &cfg).unwrap();
        let r = crate::discretization::assemble_residual(
            &field,
            &v,
            &u,
            &RhsFunctional::constant_load(1.0),
        )
        .unwrap();
        assert!(norm2(&r) <= cfg.newton_tol);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = Mesh::radial_uniform(3, 1.0, 32).unwrap();
        let field = model(3, 2.0, Some(0.05));
        let s = SobolevConstant::user_override(3, 2.0, 1.0).unwrap();
        let cfg = SolveConfig {
            truncation_schedule: vec![1, 2, 4, 8, 16, 32],
            ..Default::default()
        };
        let (u, report) =
            truncation_continuation(&field, &RhsFunctional::Zero, &mesh, &s, &cfg).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(report.flags.converged);
    }

    #[test]
    fn drift_free_field_needs_one_picard_step() {
        let mesh = Mesh::radial_uniform(3, 1.0, 32).unwrap();
        let field = model(3, 2.0, None);
        let (_, report) = resolvent_fixed_point(
            &field,
            &RhsFunctional::constant_load(1.0),
            &SolveConfig::default(),
            &DiscreteFunction::zeros(&mesh),
        )
        .unwrap();
        assert_eq!(report.levels[0].stages[0].picard_increments.len(), 1);
    }

    #[test]
    fn monitor_with_large_sigma_covers_the_domain() {
        let mesh = Mesh::radial_uniform(3, 1.0, 32).unwrap();
        let u = DiscreteFunction::interpolate(&mesh, |x| (1.0 - x[0] * x[0]) / 2.0, true);
        let field = model(3, 2.0, None);
        let m = apriori_monitor(&u, field.envelope(), Some(&[10.0]), 1e6);
        assert!((m[0].lhs - crate::discretization::gradient_power_integral(&u, 2.0)).abs() < 1e-12);
        assert!((m[0].rhs - crate::discretization::lp_norm(&u, 2.0).powi(2)).abs() < 1e-12);
        let zero = apriori_monitor(&DiscreteFunction::zeros(&mesh), field.envelope(), None, 1e6);
        assert!(zero.iter().all(|e| e.lhs == 0.0));
    }
}
