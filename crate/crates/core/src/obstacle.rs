//! Obstacle problems: admissible sets `{w >= ψ}`, reduction to nonpositive
//! obstacles, projected Newton on the discrete variational inequality and
//! complementarity diagnostics.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{
    norm_w1p, stiffness_matrix, DiscreteFunction, FrozenProblem, RhsFunctional,
};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::lorentz::SobolevConstant;
use crate::mesh::Mesh;
use crate::solver::{
    fixed_point_level, jacobian_of, newton, random_test_function, residual_of, step,
    truncation_loop, NewtonStats, SolveConfig, SolveReport,
};
use crate::structural::{EvalPoint, FieldEvaluator, QuasilinearField};

/// Nodal obstacle with `ψ <= 0`; `None` marks an unconstrained node.
#[derive(Clone, Debug)]
pub struct Obstacle {
    psi: Vec<Option<f64>>,
    original_shift: Option<DiscreteFunction>,
    mesh_id: u64,
}

fn raw_to_marker(v: f64) -> Option<f64> {
    (v != f64::NEG_INFINITY).then_some(v)
}

impl Obstacle {
    pub fn unconstrained(mesh: &Arc<Mesh>) -> Self {
        Self {
            psi: vec![None; mesh.node_count()],
            original_shift: None,
            mesh_id: mesh.id(),
        }
    }

    pub fn new(mesh: &Arc<Mesh>, psi: Vec<Option<f64>>) -> Result<Self> {
        if psi.len() != mesh.node_count() {
            return Err(Error::MeshMismatch);
        }
        for (node, v) in psi.iter().enumerate() {
            if let Some(v) = *v {
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::InvalidArgument(format!(
                        "obstacle value {v} at node {node}"
                    )));
                }
                if v > 0.0 {
                    return Err(Error::NotAdmissible {
                        node,
                        detail: format!(
                            "obstacle {v} is positive; shift it with an admissible witness first"
                        ),
                    });
                }
            }
        }
        Ok(Self {
            psi,
            original_shift: None,
            mesh_id: mesh.id(),
        })
    }

    pub fn constant(mesh: &Arc<Mesh>, c: f64) -> Result<Self> {
        Self::from_fn(mesh, |_| c)
    }

    /// Nodal interpolant; `-∞` gives unconstrained nodes.
    pub fn from_fn(mesh: &Arc<Mesh>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let psi = (0..mesh.node_count())
            .map(|i| raw_to_marker(f(mesh.node(i))))
            .collect();
        Self::new(mesh, psi)
    }

    /// Nodal values; `-∞` gives unconstrained nodes.
    pub fn from_values(mesh: &Arc<Mesh>, values: &[f64]) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::MeshMismatch);
        }
        Self::new(mesh, values.iter().map(|&v| raw_to_marker(v)).collect())
    }

    /// Rows `node,psi`; unlisted nodes are unconstrained and `-inf` is accepted.
    pub fn read_csv<R: Read>(mesh: &Arc<Mesh>, reader: R) -> Result<Self> {
        let mut psi = vec![None; mesh.node_count()];
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.records() {
            let row = row?;
            let parse = |k: usize| -> Result<&str> {
                row.get(k).map(str::trim).ok_or_else(|| {
                    Error::InvalidArgument("obstacle rows need node and psi columns".into())
                })
            };
            let node: usize = parse(0)?
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad node index: {e}")))?;
            let value: f64 = parse(1)?
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad obstacle value: {e}")))?;
            *psi.get_mut(node).ok_or(Error::MeshMismatch)? = raw_to_marker(value);
        }
        Self::new(mesh, psi)
    }

    pub fn psi(&self) -> &[Option<f64>] {
        &self.psi
    }

    /// The witness `g` when the obstacle came from [`shift_obstacle`].
    pub fn original_shift(&self) -> Option<&DiscreteFunction> {
        self.original_shift.as_ref()
    }

    pub fn is_unconstrained(&self) -> bool {
        self.psi.iter().all(Option::is_none)
    }

    fn check_mesh(&self, u: &DiscreteFunction) -> Result<()> {
        if u.mesh().id() == self.mesh_id {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// An element of the admissible set; zero works since `ψ <= 0`.
    pub fn witness(&self, mesh: &Arc<Mesh>) -> Result<DiscreteFunction> {
        let w = DiscreteFunction::zeros(mesh);
        self.check_mesh(&w)?;
        Ok(w)
    }

    /// Nodal projection `max(u, ψ)`.
    pub fn project(&self, u: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.check_mesh(u)?;
        let psi = &self.psi;
        u.map_nodal(|i, v| psi[i].map_or(v, |p| v.max(p)), u.zero_boundary())
    }

    pub fn is_admissible(&self, u: &DiscreteFunction) -> bool {
        u.mesh().id() == self.mesh_id && self.first_violation(u).is_none()
    }

    fn first_violation(&self, u: &DiscreteFunction) -> Option<usize> {
        let mesh = u.mesh();
        (0..mesh.node_count()).find(|&i| {
            let v = u.coefficients()[i];
            (mesh.is_boundary(i) && v != 0.0) || self.psi[i].is_some_and(|p| v < p)
        })
    }

    /// Nodes with `u - ψ <= tol`.
    pub fn contact_set(&self, u: &DiscreteFunction, tol: f64) -> Vec<usize> {
        let mesh = u.mesh();
        (0..mesh.node_count())
            .filter(|&i| {
                !mesh.is_boundary(i) && self.psi[i].is_some_and(|p| u.coefficients()[i] - p <= tol)
            })
            .collect()
    }
}

pub fn write_contact_csv<W: Write>(nodes: &[usize], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node"])?;
    for n in nodes {
        w.write_record([n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `Ã(x, u, ξ) = A(x, u + g, ξ + ∇g)` with `g` tabulated on quadrature points.
struct ShiftedEvaluator {
    base: Arc<dyn FieldEvaluator>,
    g: Vec<f64>,
    grad: Vec<f64>,
    dim: usize,
    mesh_id: u64,
}

impl ShiftedEvaluator {
    fn shifted(&self, pt: &EvalPoint, xi: &[f64]) -> Result<(usize, Vec<f64>)> {
        let q = pt.qp.ok_or_else(|| {
            Error::InvalidArgument("shifted fields are evaluated on quadrature points only".into())
        })?;
        let g = &self.grad[q * self.dim..(q + 1) * self.dim];
        Ok((q, xi.iter().zip(g).map(|(a, b)| a + b).collect()))
    }
}

impl FieldEvaluator for ShiftedEvaluator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, pt: &EvalPoint, u: f64, xi: &[f64], out: &mut [f64]) -> Result<()> {
        let (q, xi) = self.shifted(pt, xi)?;
        self.base.eval(pt, u + self.g[q], &xi, out)
    }

    fn jacobian_xi(&self, pt: &EvalPoint, u: f64, xi: &[f64], out: &mut [f64]) -> Result<()> {
        let (q, xi) = self.shifted(pt, xi)?;
        self.base.jacobian_xi(pt, u + self.g[q], &xi, out)
    }

    fn derivative_u(&self, pt: &EvalPoint, u: f64, xi: &[f64], out: &mut [f64]) -> Result<()> {
        let (q, xi) = self.shifted(pt, xi)?;
        self.base.derivative_u(pt, u + self.g[q], &xi, out)
    }

    fn mesh_id(&self) -> Option<u64> {
        Some(self.mesh_id)
    }
}

/// Reduces `w >= ψ_raw` to `w̃ >= ψ_raw - g` for an admissible witness `g`.
/// A solution `ũ` of the shifted problem gives `u = ũ + g`.
/// `ψ_raw` uses `-∞` for unconstrained nodes.
pub fn shift_obstacle(
    field: &QuasilinearField,
    psi_raw: &[f64],
    g: &DiscreteFunction,
) -> Result<(QuasilinearField, Obstacle)> {
    let mesh = g.mesh().clone();
    if psi_raw.len() != mesh.node_count() {
        return Err(Error::MeshMismatch);
    }
    for node in 0..mesh.node_count() {
        let gv = g.coefficients()[node];
        if mesh.is_boundary(node) && gv != 0.0 {
            return Err(Error::NotAdmissible {
                node,
                detail: format!("witness takes the value {gv} on the boundary"),
            });
        }
        if gv < psi_raw[node] {
            return Err(Error::NotAdmissible {
                node,
                detail: format!("witness {gv} lies below the obstacle {}", psi_raw[node]),
            });
        }
    }
    let psi: Vec<Option<f64>> = psi_raw
        .iter()
        .zip(g.coefficients())
        .map(|(p, gv)| raw_to_marker(*p).map(|p| p - gv))
        .collect();
    if g.max_abs() == 0.0 {
        return Ok((field.clone(), Obstacle::new(&mesh, psi)?));
    }
    let mut obstacle = Obstacle::new(&mesh, psi)?;
    obstacle.original_shift = Some(g.clone());
    let dim = mesh.field_dim();
    let mut grad = vec![0.0; mesh.qp_count() * dim];
    let mut gc = vec![0.0; dim];
    for c in 0..mesh.cell_count() {
        g.gradient_in_cell(c, &mut gc);
        for q in mesh.qp_range(c) {
            grad[q * dim..(q + 1) * dim].copy_from_slice(&gc);
        }
    }
    let evaluator = ShiftedEvaluator {
        base: field.evaluator().clone(),
        g: g.values_at_qps(),
        grad,
        dim,
        mesh_id: mesh.id(),
    };
    let shifted =
        QuasilinearField::from_evaluator("shifted", field.envelope().clone(), Arc::new(evaluator));
    Ok((shifted, obstacle))
}

/// `F_i = min(R_i, c_i (u_i - ψ_i))` on constrained nodes, `R_i` elsewhere.
fn merit(r: &[f64], u: &DiscreteFunction, obstacle: &Obstacle, scale: &[f64]) -> f64 {
    let f: Vec<f64> = r
        .iter()
        .enumerate()
        .map(|(i, &ri)| match obstacle.psi[i] {
            Some(p) => ri.min(scale[i] * (u.coefficients()[i] - p)),
            None => ri,
        })
        .collect();
    norm2(&f)
}

/// Semismooth (active-set) Newton on `min(R(u), c (u - ψ)) = 0` with
/// projected backtracking, and projected diagonal steps as a fallback.
pub(crate) fn projected_newton(
    problem: &FrozenProblem,
    u0: DiscreteFunction,
    obstacle: &Obstacle,
    cfg: &SolveConfig,
    coupled: bool,
) -> Result<(DiscreteFunction, NewtonStats)> {
    if obstacle.is_unconstrained() {
        return newton(problem, u0, cfg, coupled);
    }
    let mut u = obstacle.project(&u0)?;
    let n = u.coefficients().len();
    let mut r = residual_of(problem, &u, coupled)?;
    let mut stats = NewtonStats::default();
    let mut flat = u.max_abs() == 0.0;
    let mut polished = false;
    loop {
        let jac = jacobian_of(problem, &u, coupled)?;
        let scale: Vec<f64> = (0..n).map(|i| jac.get(i, i).abs().max(1e-300)).collect();
        let m0 = merit(&r, &u, obstacle, &scale);
        if !m0.is_finite() {
            return Err(Error::ProjectionStalled {
                iterations: stats.iterations,
                residual: m0,
            });
        }
        stats.residual = m0;
        if m0 <= cfg.newton_tol && (polished || stats.iterations >= cfg.max_newton) {
            return Ok((u, stats));
        }
        if stats.iterations >= cfg.max_newton {
            return Err(Error::ProjectionStalled {
                iterations: stats.iterations,
                residual: m0,
            });
        }
        let converged = m0 <= cfg.newton_tol;
        stats.iterations += 1;
        let mut system = if flat {
            stiffness_matrix(problem.mesh())
        } else {
            jac
        };
        flat = false;
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        for i in 0..n {
            if let Some(p) = obstacle.psi[i] {
                let gap = u.coefficients()[i] - p;
                if r[i] > scale[i] * gap {
                    system.set_identity_row(i);
                    rhs[i] = -gap;
                }
            }
        }
        let d = match system.solve(&rhs) {
            Ok(d) => d,
            Err(Error::SingularMatrix { .. }) => {
                stats.gradient_steps += 1;
                r.iter().zip(&scale).map(|(ri, c)| -ri / c).collect()
            }
            Err(e) => return Err(e),
        };
        if converged {
            polished = true;
            let trial = obstacle.project(&step(&u, &d, 1.0))?;
            let tr = residual_of(problem, &trial, coupled)?;
            if merit(&tr, &trial, obstacle, &scale) <= m0.max(cfg.newton_tol) {
                u = trial;
                r = tr;
            }
            continue;
        }
        let jacobi: Vec<f64> = r.iter().zip(&scale).map(|(ri, c)| -ri / c).collect();
        let mut accepted = false;
        for direction in [&d, &jacobi] {
            let mut tau = 1.0;
            for _ in 0..=cfg.damping.max_halvings {
                let trial = obstacle.project(&step(&u, direction, tau))?;
                let tr = residual_of(problem, &trial, coupled)?;
                let m = merit(&tr, &trial, obstacle, &scale);
                if m.is_finite() && m <= (1.0 - cfg.damping.armijo * tau) * m0 {
                    u = trial;
                    r = tr;
                    accepted = true;
                    break;
                }
                tau *= cfg.damping.shrink;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::ProjectionStalled {
                iterations: stats.iterations,
                residual: m0,
            });
        }
    }
}

/// Solves the discrete inequality
/// `∫⟨A(x, v, ∇u), ∇(w − u)⟩ >= ⟨Φ, w − u⟩` for all admissible `w`.
pub fn vi_frozen_solve(
    field: &QuasilinearField,
    v: &DiscreteFunction,
    rhs: &RhsFunctional,
    obstacle: &Obstacle,
    config: &SolveConfig,
) -> Result<DiscreteFunction> {
    config.validate()?;
    let problem = FrozenProblem::new(field, v, rhs)?;
    projected_newton(
        &problem,
        obstacle.witness(v.mesh())?,
        obstacle,
        config,
        false,
    )
    .map(|(u, _)| u)
}

/// Truncation scheme with each level solved as an obstacle problem.
pub fn vi_truncation_scheme(
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    obstacle: &Obstacle,
    mesh: &Arc<Mesh>,
    sobolev: &SobolevConstant,
    config: &SolveConfig,
) -> Result<(DiscreteFunction, SolveReport)> {
    if obstacle.mesh_id != mesh.id() {
        return Err(Error::MeshMismatch);
    }
    truncation_loop(field, mesh, sobolev, config, |f, u, level| {
        fixed_point_level(f, rhs, config, u, Some(level), Some(obstacle))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSlack {
    pub kind: String,
    /// `∫⟨A,∇(w−u)⟩ − ⟨Φ, w−u⟩`
    pub raw: f64,
    /// `raw / ‖w − u‖_{W^{1,p}}`, zero for `w = u`.
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplementarityReport {
    pub slacks: Vec<ProbeSlack>,
    pub min_slack: f64,
    pub inadmissible_probes: usize,
    pub contact_nodes: Vec<usize>,
    pub contact_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct Probe {
    pub kind: String,
    pub w: DiscreteFunction,
}

/// `γ_λ(s) = λ arctan(s/λ)`
pub fn gamma_lambda(s: f64, lambda: f64) -> f64 {
    lambda * (s / lambda).atan()
}

/// Random admissible functions `max(ψ, u + a·w)` with smooth `w`, followed by
/// `u − γ_λ(u − v)` for the first ten of them and each `λ`.
pub fn probe_family(
    u: &DiscreteFunction,
    obstacle: &Obstacle,
    count: usize,
    lambdas: &[f64],
    seed: u64,
) -> Result<Vec<Probe>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = u.max_abs().max(1e-3);
    let mut probes = Vec::with_capacity(count + 10 * lambdas.len());
    for _ in 0..count {
        let w = random_test_function(u.mesh(), &mut rng);
        let a = rng.random_range(-1.0..1.0) * amp;
        probes.push(Probe {
            kind: "random".into(),
            w: obstacle.project(&u.axpy(a, &w)?)?,
        });
    }
    let base: Vec<DiscreteFunction> = probes.iter().take(10).map(|p| p.w.clone()).collect();
    for &lambda in lambdas {
        for v in &base {
            let uc = u.coefficients();
            let w = v.map_nodal(|i, vi| uc[i] - gamma_lambda(uc[i] - vi, lambda), true)?;
            probes.push(Probe {
                kind: format!("gamma({lambda})"),
                w,
            });
        }
    }
    Ok(probes)
}

/// Signed slacks of the inequality at `u`, with the `u`-slot frozen at `u`.
pub fn complementarity_residual(
    u: &DiscreteFunction,
    obstacle: &Obstacle,
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    probes: &[Probe],
) -> Result<ComplementarityReport> {
    complementarity_residual_frozen(u, u, obstacle, field, rhs, probes)
}

pub fn complementarity_residual_frozen(
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    obstacle: &Obstacle,
    field: &QuasilinearField,
    rhs: &RhsFunctional,
    probes: &[Probe],
) -> Result<ComplementarityReport> {
    obstacle.check_mesh(u)?;
    let r = FrozenProblem::new(field, v, rhs)?.full_residual(u)?;
    let p = field.p();
    let mut slacks = Vec::with_capacity(probes.len());
    let mut inadmissible = 0;
    for probe in probes {
        if !obstacle.is_admissible(&probe.w) {
            inadmissible += 1;
            continue;
        }
        let diff = probe.w.sub(u)?;
        let raw: f64 = r.iter().zip(diff.coefficients()).map(|(a, b)| a * b).sum();
        let size = norm_w1p(&diff, p);
        slacks.push(ProbeSlack {
            kind: probe.kind.clone(),
            raw,
            normalized: if size > 0.0 { raw / size } else { 0.0 },
        });
    }
    let contact_nodes = obstacle.contact_set(u, 1e-10);
    let interior = (0..u.mesh().node_count())
        .filter(|&i| !u.mesh().is_boundary(i))
        .count()
        .max(1);
    Ok(ComplementarityReport {
        min_slack: slacks
            .iter()
            .map(|s| s.normalized)
            .fold(f64::INFINITY, f64::min),
        inadmissible_probes: inadmissible,
        contact_fraction: contact_nodes.len() as f64 / interior as f64,
        contact_nodes,
        slacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Coefficient;
    use crate::solver::frozen_solve;
    use crate::structural::ModelData;

    fn laplacian(dim: usize) -> QuasilinearField {
        QuasilinearField::model(
            ModelData::p_laplacian(dim, 2.0),
            Coefficient::zero(),
            Coefficient::zero(),
        )
        .unwrap()
    }

    #[test]
    fn positive_obstacle_needs_a_shift() {
        let mesh = Mesh::radial_uniform(3, 1.0, 8).unwrap();
        assert!(matches!(
            Obstacle::constant(&mesh, 0.1),
            Err(Error::NotAdmissible { .. })
        ));
        let field = laplacian(3);
        let psi = vec![0.1; mesh.node_count()];
        let g = DiscreteFunction::interpolate(&mesh, |_| 0.2, false);
        assert!(matches!(
            shift_obstacle(&field, &psi, &g),
            Err(Error::NotAdmissible { .. })
        ));
    }

    #[test]
    fn unconstrained_matches_equation() {
        let mesh = Mesh::radial_uniform(3, 1.0, 32).unwrap();
        let field = laplacian(3);
        let v = DiscreteFunction::zeros(&mesh);
        let rhs = RhsFunctional::constant_load(2.0);
        let cfg = SolveConfig::default();
        let a = vi_frozen_solve(&field, &v, &rhs, &Obstacle::unconstrained(&mesh), &cfg).unwrap();
        let b = frozen_solve(&field, &v, &rhs, &cfg).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
    }

    #[test]
    fn constrained_solution_is_admissible_and_stationary() {
        let mesh = Mesh::radial_uniform(3, 1.0, 64).unwrap();
        let field = laplacian(3);
        let v = DiscreteFunction::zeros(&mesh);
        let rhs = RhsFunctional::constant_load(-3.0);
        let obs = Obstacle::constant(&mesh, -0.05).unwrap();
        let cfg = SolveConfig::default();
        let u = vi_frozen_solve(&field, &v, &rhs, &obs, &cfg).unwrap();
        assert!(obs.is_admissible(&u));
        assert!(!obs.contact_set(&u, 1e-10).is_empty());
        let probes = probe_family(&u, &obs, 50, &[0.1, 1.0, 10.0], 7).unwrap();
        let rep = complementarity_residual(&u, &obs, &field, &rhs, &probes).unwrap();
        assert_eq!(rep.inadmissible_probes, 0);
        assert!(rep.min_slack >= -cfg.vi_tol, "{}", rep.min_slack);
        let same = [Probe {
            kind: "self".into(),
            w: u.clone(),
        }];
        let rep = complementarity_residual(&u, &obs, &field, &rhs, &same).unwrap();
        assert_eq!(rep.slacks[0].raw, 0.0);
    }

    #[test]
    fn obstacle_at_the_free_solution_is_touched_everywhere() {
        let mesh = Mesh::radial_uniform(3, 1.0, 32).unwrap();
        let field = laplacian(3);
        let v = DiscreteFunction::zeros(&mesh);
        let rhs = RhsFunctional::constant_load(-3.0);
        let cfg = SolveConfig::default();
        let free = frozen_solve(&field, &v, &rhs, &cfg).unwrap();
        let obs = Obstacle::new(
            &mesh,
            free.coefficients().iter().map(|c| Some(*c)).collect(),
        )
        .unwrap();
        let u = vi_frozen_solve(&field, &v, &rhs, &obs, &cfg).unwrap();
        let err = u.sub(&free).unwrap().max_abs();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn shift_and_add_back_matches_direct_solve() {
        let mesh = Mesh::radial_uniform(3, 1.0, 32).unwrap();
        let field = laplacian(3);
        let rhs = RhsFunctional::constant_load(-3.0);
        let cfg = SolveConfig::default();
        let psi: Vec<f64> = (0..mesh.node_count())
            .map(|i| if mesh.is_boundary(i) { -1.0 } else { -0.05 })
            .collect();
        let g = DiscreteFunction::interpolate(&mesh, |x| 0.1 * (1.0 - x[0] * x[0]), true);
        let (shifted, obs) = shift_obstacle(&field, &psi, &g).unwrap();
        let zero = DiscreteFunction::zeros(&mesh);
        let ut = vi_frozen_solve(&shifted, &zero, &rhs, &obs, &cfg).unwrap();
        let direct_obs = Obstacle::new(&mesh, psi.iter().map(|p| Some(*p)).collect()).unwrap();
        let direct = vi_frozen_solve(&field, &zero, &rhs, &direct_obs, &cfg).unwrap();
        let back = ut.axpy(1.0, &g).unwrap();
        let d = norm_w1p(&back.sub(&direct).unwrap(), 2.0);
        assert!(d < 10.0 * cfg.newton_tol, "{d}");
    }

    #[test]
    fn contact_csv_lists_nodes() {
        let mut buf = Vec::new();
        write_contact_csv(&[0, 3], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node\n0\n3\n");
    }
}
