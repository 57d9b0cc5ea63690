//! P1 functions, right-hand sides, and assembly of the frozen-coefficient
//! residual `R_i(u) = ∫⟨A(x, v, ∇u), ∇w_i⟩ − ⟨Φ, w_i⟩` and its Jacobian.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::lorentz::SampledScalarField;
use crate::mesh::Mesh;
use crate::profile::{Coefficient, VectorCoefficient};
use crate::structural::{EvalPoint, QuasilinearField};

#[derive(Clone, Debug)]
pub struct DiscreteFunction {
    mesh: Arc<Mesh>,
    coeffs: Vec<f64>,
    zero_boundary: bool,
}

impl DiscreteFunction {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: mesh.clone(),
            coeffs: vec![0.0; mesh.node_count()],
            zero_boundary: true,
        }
    }

    pub fn from_coefficients(
        mesh: &Arc<Mesh>,
        coeffs: Vec<f64>,
        zero_boundary: bool,
    ) -> Result<Self> {
        if coeffs.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a mesh with {} nodes",
                coeffs.len(),
                mesh.node_count()
            )));
        }
        if zero_boundary {
            if let Some(i) = (0..coeffs.len()).find(|&i| mesh.is_boundary(i) && coeffs[i] != 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "coefficient at boundary node {i} is not zero"
                )));
            }
        }
        Ok(Self {
            mesh: mesh.clone(),
            coeffs,
            zero_boundary,
        })
    }

    /// Nodal interpolant; boundary values are set to zero when `zero_boundary`.
    pub fn interpolate(mesh: &Arc<Mesh>, f: impl Fn(&[f64]) -> f64, zero_boundary: bool) -> Self {
        let coeffs = (0..mesh.node_count())
            .map(|i| {
                if zero_boundary && mesh.is_boundary(i) {
                    0.0
                } else {
                    f(mesh.node(i))
                }
            })
            .collect();
        Self {
            mesh: mesh.clone(),
            coeffs,
            zero_boundary,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    pub fn same_mesh(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.id() == other.mesh.id()
    }

    fn check_mesh(&self, other: &Self) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// `self + a·other`
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_mesh(other)?;
        Ok(Self {
            mesh: self.mesh.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + a * y)
                .collect(),
            zero_boundary: self.zero_boundary && other.zero_boundary,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|x| a * x).collect(),
            ..self.clone()
        }
    }

    pub fn map_nodal(&self, f: impl Fn(usize, f64) -> f64, zero_boundary: bool) -> Result<Self> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i, v))
            .collect();
        Self::from_coefficients(&self.mesh, coeffs, zero_boundary)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn value_at_qp(&self, q: usize) -> f64 {
        let c = self.mesh.qp_cell(q);
        self.mesh
            .cell(c)
            .iter()
            .zip(self.mesh.qp_shape(q))
            .map(|(&n, s)| self.coeffs[n] * s)
            .sum()
    }

    pub fn gradient_in_cell(&self, c: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, &n) in self.mesh.cell(c).iter().enumerate() {
            let u = self.coeffs[n];
            for (o, g) in out.iter_mut().zip(self.mesh.shape_grad(c, a)) {
                *o += u * g;
            }
        }
    }

    pub fn values_at_qps(&self) -> Vec<f64> {
        (0..self.mesh.qp_count())
            .map(|q| self.value_at_qp(q))
            .collect()
    }

    fn sampled(&self, values: Vec<f64>) -> SampledScalarField {
        SampledScalarField::new(
            self.mesh.field_dim(),
            self.mesh.qp_points_flat().to_vec(),
            values,
            self.mesh.qp_weights().to_vec(),
            self.mesh.domain_measure(),
        )
        .expect("mesh quadrature is a valid sample set")
    }

    /// `u` on the quadrature points.
    pub fn to_sampled(&self) -> SampledScalarField {
        self.sampled(self.values_at_qps())
    }

    /// `|∇u|` on the quadrature points.
    pub fn gradient_norm_sampled(&self) -> SampledScalarField {
        let mut g = vec![0.0; self.mesh.field_dim()];
        let values = (0..self.mesh.qp_count())
            .map(|q| {
                self.gradient_in_cell(self.mesh.qp_cell(q), &mut g);
                crate::profile::norm(&g)
            })
            .collect();
        self.sampled(values)
    }

    /// Rows `x_0, …, value` per node.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let coord_dim = if self.mesh.is_radial() {
            1
        } else {
            self.mesh.field_dim()
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..coord_dim).map(|d| format!("x{d}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for i in 0..self.mesh.node_count() {
            let mut row: Vec<String> = self.mesh.node(i)[..coord_dim]
                .iter()
                .map(|v| format!("{v:e}"))
                .collect();
            row.push(format!("{:e}", self.coeffs[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(∫|u|^p)^{1/p}` by quadrature.
pub fn lp_norm(u: &DiscreteFunction, p: f64) -> f64 {
    let m = u.mesh();
    (0..m.qp_count())
        .map(|q| m.qp_weight(q) * u.value_at_qp(q).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `‖∇u‖_p`, exact for P1 functions.
pub fn norm_w1p(u: &DiscreteFunction, p: f64) -> f64 {
    gradient_power_integral(u, p).powf(1.0 / p)
}

/// `∫|∇u|^p`
pub fn gradient_power_integral(u: &DiscreteFunction, p: f64) -> f64 {
    let m = u.mesh();
    let mut g = vec![0.0; m.field_dim()];
    (0..m.cell_count())
        .map(|c| {
            u.gradient_in_cell(c, &mut g);
            m.cell_measure(c) * crate::profile::norm(&g).powf(p)
        })
        .sum()
}

/// `‖∇u_h − ∇u‖_p` against an exact gradient sampled on quadrature points.
pub fn gradient_error(u: &DiscreteFunction, exact: impl Fn(&[f64], &mut [f64]), p: f64) -> f64 {
    let m = u.mesh();
    let dim = m.field_dim();
    let (mut g, mut e) = (vec![0.0; dim], vec![0.0; dim]);
    let mut total = 0.0;
    for c in 0..m.cell_count() {
        u.gradient_in_cell(c, &mut g);
        for q in m.qp_range(c) {
            exact(m.qp_point(q), &mut e);
            let d: f64 = g.iter().zip(&e).map(|(a, b)| (a - b) * (a - b)).sum();
            total += m.qp_weight(q) * d.sqrt().powf(p);
        }
    }
    total.powf(1.0 / p)
}

/// `‖∇(u - v)‖_p`
pub fn w1p_distance(u: &DiscreteFunction, v: &DiscreteFunction, p: f64) -> Result<f64> {
    Ok(norm_w1p(&u.sub(v)?, p))
}

/// Element of `W^{-1,p'}` acting on test functions.
#[derive(Clone, Debug)]
pub enum RhsFunctional {
    Zero,
    /// `⟨Φ, w⟩ = ∫ f w`
    Load(Coefficient),
    /// `Φ = div(|F|^{p-2} F)`, `⟨Φ, w⟩ = −∫ |F|^{p-2} F·∇w`
    FField {
        field: VectorCoefficient,
        p: f64,
    },
    /// `F` given on the mesh quadrature points, `dim` values per point.
    FSamples {
        values: Vec<f64>,
        p: f64,
        mesh_id: u64,
    },
    /// Precomputed `⟨Φ, w_i⟩` per node.
    Nodal(Vec<f64>),
    Sum(Vec<RhsFunctional>),
}

impl RhsFunctional {
    pub fn load(f: Coefficient) -> Self {
        RhsFunctional::Load(f)
    }

    pub fn constant_load(value: f64) -> Self {
        RhsFunctional::Load(Coefficient::constant(value))
    }

    pub fn f_field(field: VectorCoefficient, p: f64) -> Self {
        RhsFunctional::FField { field, p }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RhsFunctional::Zero => true,
            RhsFunctional::Nodal(v) => v.iter().all(|x| *x == 0.0),
            RhsFunctional::Sum(parts) => parts.iter().all(RhsFunctional::is_zero),
            _ => false,
        }
    }

    /// `⟨Φ, w_i⟩` for every hat function `w_i`.
    pub fn load_vector(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        let n = mesh.node_count();
        let dim = mesh.field_dim();
        let mut out = vec![0.0; n];
        match self {
            RhsFunctional::Zero => {}
            RhsFunctional::Load(f) => {
                for q in 0..mesh.qp_count() {
                    let fw = f.eval(mesh.qp_point(q)) * mesh.qp_weight(q);
                    let c = mesh.qp_cell(q);
                    for (&node, s) in mesh.cell(c).iter().zip(mesh.qp_shape(q)) {
                        out[node] += fw * s;
                    }
                }
            }
            RhsFunctional::FField { field, p } => {
                let mut v = vec![0.0; dim];
                for q in 0..mesh.qp_count() {
                    field.eval(mesh.qp_point(q), &mut v);
                    flux_load(mesh, q, &v, *p, &mut out);
                }
            }
            RhsFunctional::FSamples { values, p, mesh_id } => {
                if *mesh_id != mesh.id() || values.len() != mesh.qp_count() * dim {
                    return Err(Error::MeshMismatch);
                }
                for q in 0..mesh.qp_count() {
                    flux_load(mesh, q, &values[q * dim..(q + 1) * dim], *p, &mut out);
                }
            }
            RhsFunctional::Nodal(v) => {
                if v.len() != n {
                    return Err(Error::MeshMismatch);
                }
                out.copy_from_slice(v);
            }
            RhsFunctional::Sum(parts) => {
                for part in parts {
                    for (o, v) in out.iter_mut().zip(part.load_vector(mesh)?) {
                        *o += v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `‖F‖_r` for flux forms, `None` otherwise.
    pub fn flux_lr_norm(&self, mesh: &Mesh, r: f64) -> Option<f64> {
        let dim = mesh.field_dim();
        match self {
            RhsFunctional::FField { field, .. } => {
                let mut v = vec![0.0; dim];
                let s: f64 = (0..mesh.qp_count())
                    .map(|q| {
                        field.eval(mesh.qp_point(q), &mut v);
                        mesh.qp_weight(q) * crate::profile::norm(&v).powf(r)
                    })
                    .sum();
                Some(s.powf(1.0 / r))
            }
            RhsFunctional::FSamples { values, .. } => {
                let s: f64 = (0..mesh.qp_count())
                    .map(|q| {
                        mesh.qp_weight(q)
                            * crate::profile::norm(&values[q * dim..(q + 1) * dim]).powf(r)
                    })
                    .sum();
                Some(s.powf(1.0 / r))
            }
            RhsFunctional::Zero => Some(0.0),
            _ => None,
        }
    }
}

fn flux_load(mesh: &Mesh, q: usize, f: &[f64], p: f64, out: &mut [f64]) {
    let size = crate::profile::norm(f);
    if size == 0.0 {
        return;
    }
    let scale = -mesh.qp_weight(q) * size.powf(p - 2.0);
    let c = mesh.qp_cell(q);
    for (a, &node) in mesh.cell(c).iter().enumerate() {
        let g: f64 = mesh
            .shape_grad(c, a)
            .iter()
            .zip(f)
            .map(|(x, y)| x * y)
            .sum();
        out[node] += scale * g;
    }
}

/// The frozen problem `−div A(x, v, ∇u) = Φ` on a mesh, with the load vector
/// and the frozen values of `v` on quadrature points precomputed.
pub struct FrozenProblem<'a> {
    field: &'a QuasilinearField,
    mesh: Arc<Mesh>,
    frozen: Vec<f64>,
    load: Vec<f64>,
}

impl<'a> FrozenProblem<'a> {
    pub fn new(
        field: &'a QuasilinearField,
        v: &DiscreteFunction,
        rhs: &RhsFunctional,
    ) -> Result<Self> {
        let load = rhs.load_vector(v.mesh())?;
        Self::with_load(field, v, load)
    }

    pub fn with_load(
        field: &'a QuasilinearField,
        v: &DiscreteFunction,
        load: Vec<f64>,
    ) -> Result<Self> {
        let mesh = v.mesh().clone();
        if field
            .evaluator()
            .mesh_id()
            .is_some_and(|id| id != mesh.id())
            || field.dim() != mesh.field_dim()
        {
            return Err(Error::MeshMismatch);
        }
        if load.len() != mesh.node_count() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self {
            field,
            frozen: v.values_at_qps(),
            mesh,
            load,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn set_frozen(&mut self, v: &DiscreteFunction) -> Result<()> {
        if v.mesh().id() != self.mesh.id() {
            return Err(Error::MeshMismatch);
        }
        self.frozen = v.values_at_qps();
        Ok(())
    }

    fn check(&self, u: &DiscreteFunction) -> Result<()> {
        if u.mesh().id() == self.mesh.id() {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// `∫⟨A(x, v, ∇u), ∇w_i⟩ − ⟨Φ, w_i⟩` for all nodes, boundary rows included.
    pub fn full_residual(&self, u: &DiscreteFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        self.flux_residual(u, None)
    }

    /// Residual with the frozen slot replaced by `u` itself.
    pub fn full_coupled_residual(&self, u: &DiscreteFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        let own = u.values_at_qps();
        self.flux_residual(u, Some(&own))
    }

    fn flux_residual(&self, u: &DiscreteFunction, slot: Option<&[f64]>) -> Result<Vec<f64>> {
        let m = &*self.mesh;
        let dim = m.field_dim();
        let slot = slot.unwrap_or(&self.frozen);
        let mut r: Vec<f64> = self.load.iter().map(|v| -v).collect();
        let (mut g, mut a) = (vec![0.0; dim], vec![0.0; dim]);
        for c in 0..m.cell_count() {
            u.gradient_in_cell(c, &mut g);
            for q in m.qp_range(c) {
                let pt = EvalPoint {
                    x: m.qp_point(q),
                    qp: Some(q),
                };
                self.field.evaluator().eval(&pt, slot[q], &g, &mut a)?;
                let w = m.qp_weight(q);
                for (k, &node) in m.cell(c).iter().enumerate() {
                    let dot: f64 = a.iter().zip(m.shape_grad(c, k)).map(|(x, y)| x * y).sum();
                    r[node] += w * dot;
                }
            }
        }
        Ok(r)
    }

    /// Residual with boundary rows set to zero.
    pub fn residual(&self, u: &DiscreteFunction) -> Result<Vec<f64>> {
        let mut r = self.full_residual(u)?;
        self.zero_boundary_rows(&mut r);
        Ok(r)
    }

    pub fn coupled_residual(&self, u: &DiscreteFunction) -> Result<Vec<f64>> {
        let mut r = self.full_coupled_residual(u)?;
        self.zero_boundary_rows(&mut r);
        Ok(r)
    }

    pub fn zero_boundary_rows(&self, r: &mut [f64]) {
        for (i, v) in r.iter_mut().enumerate() {
            if self.mesh.is_boundary(i) {
                *v = 0.0;
            }
        }
    }

    /// `∂R/∂u` with identity rows and columns at boundary nodes.
    pub fn jacobian(&self, u: &DiscreteFunction) -> Result<CsrMatrix> {
        self.check(u)?;
        self.assemble_jacobian(u, None)
    }

    /// Jacobian of the coupled residual, including the `∂A/∂u` term.
    pub fn coupled_jacobian(&self, u: &DiscreteFunction) -> Result<CsrMatrix> {
        self.check(u)?;
        let own = u.values_at_qps();
        self.assemble_jacobian(u, Some(&own))
    }

    fn assemble_jacobian(
        &self,
        u: &DiscreteFunction,
        coupled: Option<&[f64]>,
    ) -> Result<CsrMatrix> {
        let m = &*self.mesh;
        let dim = m.field_dim();
        let local = m.local_nodes();
        let slot = coupled.unwrap_or(&self.frozen);
        let mut jac = CsrMatrix::zeros(m.pattern().clone());
        let (mut g, mut jq, mut du) = (vec![0.0; dim], vec![0.0; dim * dim], vec![0.0; dim]);
        let mut jg = vec![0.0; dim];
        for c in 0..m.cell_count() {
            u.gradient_in_cell(c, &mut g);
            let slots = m.cell_slots(c);
            for q in m.qp_range(c) {
                let pt = EvalPoint {
                    x: m.qp_point(q),
                    qp: Some(q),
                };
                self.field
                    .evaluator()
                    .jacobian_xi(&pt, slot[q], &g, &mut jq)?;
                if coupled.is_some() {
                    self.field
                        .evaluator()
                        .derivative_u(&pt, slot[q], &g, &mut du)?;
                }
                let w = m.qp_weight(q);
                let shape = m.qp_shape(q);
                for b in 0..local {
                    let gb = m.shape_grad(c, b);
                    for i in 0..dim {
                        jg[i] = (0..dim).map(|j| jq[i * dim + j] * gb[j]).sum();
                        if coupled.is_some() {
                            jg[i] += du[i] * shape[b];
                        }
                    }
                    for a in 0..local {
                        let dot: f64 = jg.iter().zip(m.shape_grad(c, a)).map(|(x, y)| x * y).sum();
                        jac.values_mut()[slots[a * local + b]] += w * dot;
                    }
                }
            }
        }
        for i in 0..m.node_count() {
            if m.is_boundary(i) {
                jac.set_identity_row_col(i);
            }
        }
        Ok(jac)
    }
}

pub fn assemble_residual(
    field: &QuasilinearField,
    v_frozen: &DiscreteFunction,
    u: &DiscreteFunction,
    rhs: &RhsFunctional,
) -> Result<Vec<f64>> {
    v_frozen.check_mesh(u)?;
    FrozenProblem::new(field, v_frozen, rhs)?.residual(u)
}

pub fn assemble_jacobian(
    field: &QuasilinearField,
    v_frozen: &DiscreteFunction,
    u: &DiscreteFunction,
    rhs: &RhsFunctional,
) -> Result<CsrMatrix> {
    v_frozen.check_mesh(u)?;
    FrozenProblem::new(field, v_frozen, rhs)?.jacobian(u)
}

/// `∫⟨A(x, u, ∇u), ∇w⟩ − ⟨Φ, w⟩` for a test function `w`.
pub fn weak_form_defect(
    field: &QuasilinearField,
    u: &DiscreteFunction,
    rhs: &RhsFunctional,
    w: &DiscreteFunction,
) -> Result<f64> {
    u.check_mesh(w)?;
    let r = FrozenProblem::new(field, u, rhs)?.full_residual(u)?;
    Ok(r.iter().zip(w.coefficients()).map(|(a, b)| a * b).sum())
}

/// Stiffness matrix `∫∇w_i·∇w_j` with identity boundary rows and columns.
pub fn stiffness_matrix(mesh: &Mesh) -> CsrMatrix {
    bilinear_matrix(mesh, |c, a, b, _| {
        mesh.shape_grad(c, a)
            .iter()
            .zip(mesh.shape_grad(c, b))
            .map(|(x, y)| x * y)
            .sum()
    })
}

/// Mass matrix `∫w_i w_j` with identity boundary rows and columns.
pub fn mass_matrix(mesh: &Mesh) -> CsrMatrix {
    bilinear_matrix(mesh, |_, a, b, s| s[a] * s[b])
}

/// Assembles `Σ_q w_q k(c, a, b, shape_q)` per local pair; `k` sees the cell,
/// local indices and shape values at the quadrature point.
pub fn bilinear_matrix(mesh: &Mesh, k: impl Fn(usize, usize, usize, &[f64]) -> f64) -> CsrMatrix {
    let local = mesh.local_nodes();
    let mut mat = CsrMatrix::zeros(mesh.pattern().clone());
    for c in 0..mesh.cell_count() {
        let slots = mesh.cell_slots(c);
        for q in mesh.qp_range(c) {
            let w = mesh.qp_weight(q);
            let s = mesh.qp_shape(q);
            for a in 0..local {
                for b in 0..local {
                    mat.values_mut()[slots[a * local + b]] += w * k(c, a, b, s);
                }
            }
        }
    }
    for i in 0..mesh.node_count() {
        if mesh.is_boundary(i) {
            mat.set_identity_row_col(i);
        }
    }
    mat
}

/// Interior node indices.
pub fn interior_nodes(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.node_count())
        .filter(|&i| !mesh.is_boundary(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structural::ModelData;
    use std::f64::consts::PI;

    fn laplacian(dim: usize) -> QuasilinearField {
        QuasilinearField::model(
            ModelData::p_laplacian(dim, 2.0),
            Coefficient::zero(),
            Coefficient::zero(),
        )
        .unwrap()
    }

    #[test]
    fn zero_function_has_zero_norms() {
        let mesh = Mesh::radial_uniform(3, 1.0, 16).unwrap();
        let u = DiscreteFunction::zeros(&mesh);
        assert_eq!(norm_w1p(&u, 2.0), 0.0);
        assert_eq!(lp_norm(&u, 3.0), 0.0);
    }

    #[test]
    fn gradient_norm_of_paraboloid() {
        let mut prev = f64::INFINITY;
        for cells in [32, 64, 128] {
            let mesh = Mesh::radial_uniform(3, 1.0, cells).unwrap();
            let u = DiscreteFunction::interpolate(&mesh, |x| (1.0 - x[0] * x[0]) / 2.0, true);
            let err = (gradient_power_integral(&u, 2.0) - 4.0 * PI / 5.0).abs();
            assert!(err < 4.0 / (cells * cells) as f64, "cells {cells}: {err}");
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn laplacian_jacobian_is_symmetric_stiffness() {
        let mesh = Mesh::unit_disc(3).unwrap();
        let mesh3 = Mesh::radial_uniform(3, 1.0, 20).unwrap();
        let f = laplacian(3);
        let u = DiscreteFunction::interpolate(&mesh3, |x| x[0].cos(), true);
        let j = assemble_jacobian(&f, &u, &u, &RhsFunctional::Zero).unwrap();
        let k = stiffness_matrix(&mesh3);
        assert!(j.max_asymmetry() < 1e-12);
        for (a, b) in j.values().iter().zip(k.values()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
        assert!(stiffness_matrix(&mesh).max_asymmetry() < 1e-12);
    }

    #[test]
    fn residual_of_manufactured_solution_is_small() {
        let mesh = Mesh::radial_uniform(3, 1.0, 64).unwrap();
        let u = DiscreteFunction::interpolate(&mesh, |x| (1.0 - x[0] * x[0]) / 2.0, true);
        let r =
            assemble_residual(&laplacian(3), &u, &u, &RhsFunctional::constant_load(3.0)).unwrap();
        let load = RhsFunctional::constant_load(3.0)
            .load_vector(&mesh)
            .unwrap();
        let scale = crate::linalg::norm_inf(&load);
        assert!(crate::linalg::norm_inf(&r) < 0.05 * scale);
    }

    #[test]
    fn mismatched_meshes_are_rejected() {
        let m1 = Mesh::radial_uniform(3, 1.0, 8).unwrap();
        let m2 = Mesh::radial_uniform(3, 1.0, 8).unwrap();
        let u = DiscreteFunction::zeros(&m1);
        let v = DiscreteFunction::zeros(&m2);
        assert!(matches!(
            assemble_residual(&laplacian(3), &v, &u, &RhsFunctional::Zero),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn flux_rhs_matches_load_for_gradient_fields() {
        // F = -∇g with g = (1-r²)/2 gives ⟨Φ,w⟩ = ∫∇g·∇w = ∫(-Δg) w = N ∫ w
        let mesh = Mesh::radial_uniform(3, 1.0, 200).unwrap();
        let flux = RhsFunctional::f_field(
            VectorCoefficient::custom("x", |x, out| out.copy_from_slice(x)),
            2.0,
        )
        .load_vector(&mesh)
        .unwrap();
        let load = RhsFunctional::constant_load(3.0)
            .load_vector(&mesh)
            .unwrap();
        let interior = interior_nodes(&mesh);
        for &i in interior.iter().filter(|&&i| mesh.node_radius(i) > 0.05) {
            assert!(
                (flux[i] - load[i]).abs() < 1e-3 * load[i].abs().max(1e-12),
                "node {i}"
            );
        }
    }
}
