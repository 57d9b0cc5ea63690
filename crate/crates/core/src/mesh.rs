//! P1 meshes: radial reductions of balls in `R^N` and planar triangulations.
//!
//! A radial mesh discretizes `[0, R]`; functions on it are radial functions
//! on the ball of radius `R` in `R^N`. Points are embedded as `(r, 0, …, 0)`
//! so that fields see genuine `N`-dimensional arguments. The innermost cell
//! `[0, r_1]` uses a one-point rule at `r_1` carrying the exact measure of
//! the ball of radius `r_1`, with the ball averages of the hat functions as
//! shape values; other cells use three-point Gauss rules against the weight
//! `N ω_N r^{N-1}`.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::unit_ball_measure;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Debug, PartialEq)]
pub enum MeshKind {
    Radial { dim: usize, radius: f64 },
    Planar,
}

/// Compressed sparse row pattern of the P1 stiffness matrix.
#[derive(Clone, Debug)]
pub struct SparsityPattern {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Slot of `(i, j)` in the value array.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

#[derive(Debug)]
pub struct Mesh {
    id: u64,
    kind: MeshKind,
    field_dim: usize,
    /// Ambient coordinates, `field_dim` per node.
    nodes: Vec<f64>,
    /// Local nodes per cell: 2 (radial) or 3 (planar).
    local: usize,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    cell_measure: Vec<f64>,
    /// Shape gradients, `local * field_dim` per cell.
    cell_grad: Vec<f64>,
    qp_cell: Vec<usize>,
    qp_x: Vec<f64>,
    qp_w: Vec<f64>,
    /// Shape values, `local` per point.
    qp_shape: Vec<f64>,
    cell_qp: Vec<usize>,
    pattern: Arc<SparsityPattern>,
    /// Pattern slot of each local pair, `local²` per cell.
    cell_slots: Vec<usize>,
    measure: f64,
}

impl Mesh {
    /// Uniform radial mesh of the ball of radius `radius` in `R^dim`.
    pub fn radial_uniform(dim: usize, radius: f64, cells: usize) -> Result<Arc<Self>> {
        if cells == 0 {
            return Err(Error::InvalidArgument(
                "radial mesh needs at least one cell".into(),
            ));
        }
        let nodes = (0..=cells)
            .map(|i| radius * i as f64 / cells as f64)
            .collect();
        Self::radial_from_nodes(dim, nodes)
    }

    /// Geometrically graded radial mesh: nodes `0, r_1, …, R` with the
    /// `cells - 1` outer cells in constant ratio from `inner` to `radius`.
    pub fn radial_graded(dim: usize, radius: f64, cells: usize, inner: f64) -> Result<Arc<Self>> {
        if cells < 2 || !(inner > 0.0 && inner < radius) {
            return Err(Error::InvalidArgument(format!(
                "graded mesh needs >= 2 cells and 0 < inner < radius (got {cells}, {inner})"
            )));
        }
        let ratio = (radius / inner).powf(1.0 / (cells - 1) as f64);
        let mut nodes = vec![0.0];
        let mut r = inner;
        for _ in 0..cells - 1 {
            nodes.push(r);
            r *= ratio;
        }
        nodes.push(radius);
        Self::radial_from_nodes(dim, nodes)
    }

    /// Graded mesh with the given growth ratio between consecutive outer cells.
    pub fn radial_graded_ratio(
        dim: usize,
        radius: f64,
        inner: f64,
        ratio: f64,
    ) -> Result<Arc<Self>> {
        if !(ratio > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grading ratio {ratio} must exceed 1"
            )));
        }
        let cells = ((radius / inner).ln() / ratio.ln()).ceil() as usize + 1;
        Self::radial_graded(dim, radius, cells.max(2), inner)
    }

    /// Radial mesh from increasing nodes starting at 0.
    pub fn radial_from_nodes(dim: usize, nodes: Vec<f64>) -> Result<Arc<Self>> {
        if dim < 1 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "radial nodes must start at 0 and contain a cell".into(),
            ));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "radial cell {i} is degenerate"
            )));
        }
        let ncell = nodes.len() - 1;
        let radius = *nodes.last().unwrap();
        let omega = unit_ball_measure(dim);
        let surface = dim as f64 * omega;
        let (gx, gw) = gauss_legendre(3);

        let mut ambient = vec![0.0; nodes.len() * dim];
        for (i, r) in nodes.iter().enumerate() {
            ambient[i * dim] = *r;
        }
        let mut boundary = vec![false; nodes.len()];
        boundary[ncell] = true;

        let mut cells = Vec::with_capacity(2 * ncell);
        let mut cell_measure = Vec::with_capacity(ncell);
        let mut cell_grad = vec![0.0; ncell * 2 * dim];
        let (mut qp_cell, mut qp_x, mut qp_w, mut qp_shape) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut cell_qp = vec![0];
        for c in 0..ncell {
            let (a, b) = (nodes[c], nodes[c + 1]);
            let h = b - a;
            cells.extend_from_slice(&[c, c + 1]);
            cell_measure.push(omega * (b.powi(dim as i32) - a.powi(dim as i32)));
            cell_grad[c * 2 * dim] = -1.0 / h;
            cell_grad[c * 2 * dim + dim] = 1.0 / h;
            let mut push = |r: f64, w: f64, s: f64| {
                qp_cell.push(c);
                qp_x.push(r);
                qp_x.extend(std::iter::repeat_n(0.0, dim - 1));
                qp_w.push(w);
                qp_shape.extend_from_slice(&[1.0 - s, s]);
            };
            if c == 0 {
                // shape values are the ball averages of the two hat functions
                push(
                    b,
                    omega * b.powi(dim as i32),
                    dim as f64 / (dim as f64 + 1.0),
                );
            } else {
                for (xi, wi) in gx.iter().zip(gw) {
                    let r = a + 0.5 * h * (xi + 1.0);
                    push(
                        r,
                        0.5 * h * wi * surface * r.powi(dim as i32 - 1),
                        (r - a) / h,
                    );
                }
            }
            cell_qp.push(qp_w.len());
        }
        Ok(Arc::new(Self::finish(
            MeshKind::Radial { dim, radius },
            dim,
            ambient,
            2,
            cells,
            boundary,
            cell_measure,
            cell_grad,
            (qp_cell, qp_x, qp_w, qp_shape, cell_qp),
            omega * radius.powi(dim as i32),
        )))
    }

    /// Planar P1 mesh. Boundary nodes are the endpoints of edges owned by a
    /// single triangle unless given explicitly.
    pub fn planar(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Option<Vec<bool>>,
    ) -> Result<Arc<Self>> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidArgument(
                "planar mesh has no triangles".into(),
            ));
        }
        let mut cells = Vec::with_capacity(3 * triangles.len());
        let mut cell_measure = Vec::with_capacity(triangles.len());
        let mut cell_grad = Vec::with_capacity(6 * triangles.len());
        let (mut qp_cell, mut qp_x, mut qp_w, mut qp_shape) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut cell_qp = vec![0];
        let mut edges = std::collections::BTreeMap::<(usize, usize), usize>::new();
        for (c, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {c} references a missing vertex"
                )));
            }
            let [p0, p1, p2] = t.map(|i| vertices[i]);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            let area = 0.5 * det.abs();
            if !(area > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {c} is degenerate"
                )));
            }
            cells.extend_from_slice(t);
            cell_measure.push(area);
            // ∇λ_i = rot90(opposite edge) / det
            let pts = [p0, p1, p2];
            for i in 0..3 {
                let (pj, pk) = (pts[(i + 1) % 3], pts[(i + 2) % 3]);
                cell_grad.push((pj[1] - pk[1]) / det);
                cell_grad.push((pk[0] - pj[0]) / det);
            }
            for bary in [
                [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            ] {
                qp_cell.push(c);
                for d in 0..2 {
                    qp_x.push(bary[0] * p0[d] + bary[1] * p1[d] + bary[2] * p2[d]);
                }
                qp_w.push(area / 3.0);
                qp_shape.extend_from_slice(&bary);
            }
            cell_qp.push(qp_w.len());
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary = match boundary {
            Some(b) if b.len() == nv => b,
            Some(_) => {
                return Err(Error::InvalidArgument(
                    "boundary flag count differs from vertex count".into(),
                ))
            }
            None => {
                let mut b = vec![false; nv];
                for (&(i, j), &count) in &edges {
                    if count == 1 {
                        b[i] = true;
                        b[j] = true;
                    }
                }
                b
            }
        };
        let measure = cell_measure.iter().sum();
        let ambient = vertices.iter().flat_map(|v| v.iter().copied()).collect();
        Ok(Arc::new(Self::finish(
            MeshKind::Planar,
            2,
            ambient,
            3,
            cells,
            boundary,
            cell_measure,
            cell_grad,
            (qp_cell, qp_x, qp_w, qp_shape, cell_qp),
            measure,
        )))
    }

    /// Union-jack triangulation of `[0,1]²` with `2k×2k` squares.
    pub fn unit_square(k: usize) -> Result<Arc<Self>> {
        let (v, t) = union_jack(k);
        let v = v
            .into_iter()
            .map(|[x, y]| [0.5 * (x + 1.0), 0.5 * (y + 1.0)])
            .collect();
        Self::planar(v, t, None)
    }

    /// Triangulation of the unit disc: a union-jack mesh of `[-1,1]²` with
    /// `2k×2k` squares mapped by `(x√(1-y²/2), y√(1-x²/2))`.
    pub fn unit_disc(k: usize) -> Result<Arc<Self>> {
        let (v, t) = union_jack(k);
        let v = v
            .into_iter()
            .map(|[x, y]| {
                [
                    x * (1.0 - 0.5 * y * y).sqrt(),
                    y * (1.0 - 0.5 * x * x).sqrt(),
                ]
            })
            .collect();
        Self::planar(v, t, None)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        kind: MeshKind,
        field_dim: usize,
        nodes: Vec<f64>,
        local: usize,
        cells: Vec<usize>,
        boundary: Vec<bool>,
        cell_measure: Vec<f64>,
        cell_grad: Vec<f64>,
        qp: (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<usize>),
        measure: f64,
    ) -> Self {
        let nn = boundary.len();
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nn];
        for cell in cells.chunks(local) {
            for &a in cell {
                for &b in cell {
                    rows[a].insert(b);
                }
            }
        }
        for (i, r) in rows.iter_mut().enumerate() {
            r.insert(i);
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for r in &rows {
            col_idx.extend(r.iter().copied());
            row_ptr.push(col_idx.len());
        }
        let pattern = SparsityPattern { row_ptr, col_idx };
        let mut cell_slots = Vec::with_capacity(cells.len() * local);
        for cell in cells.chunks(local) {
            for &a in cell {
                for &b in cell {
                    cell_slots.push(pattern.slot(a, b).unwrap());
                }
            }
        }
        let (qp_cell, qp_x, qp_w, qp_shape, cell_qp) = qp;
        Self {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            kind,
            field_dim,
            nodes,
            local,
            cells,
            boundary,
            cell_measure,
            cell_grad,
            qp_cell,
            qp_x,
            qp_w,
            qp_shape,
            cell_qp,
            pattern: Arc::new(pattern),
            cell_slots,
            measure,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> &MeshKind {
        &self.kind
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, MeshKind::Radial { .. })
    }

    /// Dimension `N` of the points fields are evaluated at.
    pub fn field_dim(&self) -> usize {
        self.field_dim
    }

    pub fn node_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_measure.len()
    }

    pub fn local_nodes(&self) -> usize {
        self.local
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.field_dim..(i + 1) * self.field_dim]
    }

    /// `|x|` at node `i`.
    pub fn node_radius(&self, i: usize) -> f64 {
        crate::profile::norm(self.node(i))
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * self.local..(c + 1) * self.local]
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        self.cell_measure[c]
    }

    /// Gradient of local shape function `a` on cell `c`.
    pub fn shape_grad(&self, c: usize, a: usize) -> &[f64] {
        let off = (c * self.local + a) * self.field_dim;
        &self.cell_grad[off..off + self.field_dim]
    }

    /// Largest cell diameter (radial: largest cell length).
    pub fn max_cell_size(&self) -> f64 {
        (0..self.cell_count())
            .map(|c| {
                let cell = self.cell(c);
                let mut d: f64 = 0.0;
                for &a in cell {
                    for &b in cell {
                        let s: f64 = self
                            .node(a)
                            .iter()
                            .zip(self.node(b))
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum();
                        d = d.max(s.sqrt());
                    }
                }
                d
            })
            .fold(0.0, f64::max)
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn qp_count(&self) -> usize {
        self.qp_w.len()
    }

    pub fn qp_range(&self, c: usize) -> std::ops::Range<usize> {
        self.cell_qp[c]..self.cell_qp[c + 1]
    }

    pub fn qp_cell(&self, q: usize) -> usize {
        self.qp_cell[q]
    }

    pub fn qp_point(&self, q: usize) -> &[f64] {
        &self.qp_x[q * self.field_dim..(q + 1) * self.field_dim]
    }

    pub fn qp_weight(&self, q: usize) -> f64 {
        self.qp_w[q]
    }

    pub fn qp_weights(&self) -> &[f64] {
        &self.qp_w
    }

    pub fn qp_points_flat(&self) -> &[f64] {
        &self.qp_x
    }

    pub fn qp_shape(&self, q: usize) -> &[f64] {
        &self.qp_shape[q * self.local..(q + 1) * self.local]
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn cell_slots(&self, c: usize) -> &[usize] {
        let l2 = self.local * self.local;
        &self.cell_slots[c * l2..(c + 1) * l2]
    }

    /// Measure of the discretized domain; equals the sum of quadrature weights.
    pub fn domain_measure(&self) -> f64 {
        self.measure
    }

    /// Radius of the largest centered ball inside the domain.
    pub fn inscribed_radius(&self) -> f64 {
        match self.kind {
            MeshKind::Radial { radius, .. } => radius,
            MeshKind::Planar => (0..self.node_count())
                .filter(|&i| self.boundary[i])
                .map(|i| self.node_radius(i))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Writes `x_0,…,x_{d-1},boundary` vertex rows and node-index cell rows.
    /// Radial meshes write the single coordinate `r`.
    pub fn write_csv<V: Write, C: Write>(&self, vertices: V, cells: C) -> Result<()> {
        let coord_dim = if self.is_radial() { 1 } else { self.field_dim };
        let mut w = csv::Writer::from_writer(vertices);
        let mut header: Vec<String> = (0..coord_dim).map(|d| format!("x{d}")).collect();
        header.push("boundary".into());
        w.write_record(&header)?;
        for i in 0..self.node_count() {
            let mut row: Vec<String> = self.node(i)[..coord_dim]
                .iter()
                .map(|v| format!("{v:e}"))
                .collect();
            row.push(u8::from(self.boundary[i]).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(cells);
        let header: Vec<String> = (0..self.local).map(|a| format!("n{a}")).collect();
        w.write_record(&header)?;
        for c in 0..self.cell_count() {
            w.write_record(self.cell(c).iter().map(|n| n.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a mesh written by [`Mesh::write_csv`]. One coordinate column
    /// means a radial mesh in dimension `radial_dim`.
    pub fn read_csv<V: Read, C: Read>(
        vertices: V,
        cells: C,
        radial_dim: usize,
    ) -> Result<Arc<Self>> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(vertices);
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut flags = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("vertex line {}: {e}", line + 2)))?;
            let Some((&flag, xs)) = row.split_last() else {
                return Err(Error::InvalidArgument(format!(
                    "vertex line {} is empty",
                    line + 2
                )));
            };
            flags.push(flag != 0.0);
            coords.push(xs.to_vec());
        }
        let dim = coords.first().map_or(0, Vec::len);
        if dim == 1 {
            return Self::radial_from_nodes(radial_dim, coords.into_iter().map(|c| c[0]).collect());
        }
        if dim != 2 || coords.iter().any(|c| c.len() != 2) {
            return Err(Error::InvalidArgument(
                "vertex file must have 1 or 2 coordinate columns".into(),
            ));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(cells);
        let mut triangles = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let idx: Vec<usize> = rec
                .iter()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("cell line {}: {e}", line + 2)))?;
            let t: [usize; 3] = idx.try_into().map_err(|_| {
                Error::InvalidArgument(format!("cell line {} needs 3 indices", line + 2))
            })?;
            triangles.push(t);
        }
        let vertices = coords.into_iter().map(|c| [c[0], c[1]]).collect();
        Self::planar(vertices, triangles, Some(flags))
    }
}

/// Union-jack triangulation of `[-1,1]²` with `2k×2k` squares; the diagonal
/// of each square points away from the center.
fn union_jack(k: usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let m = 2 * k.max(1);
    let h = 2.0 / m as f64;
    let idx = |i: usize, j: usize| j * (m + 1) + i;
    let mut v = Vec::with_capacity((m + 1) * (m + 1));
    for j in 0..=m {
        for i in 0..=m {
            v.push([-1.0 + h * i as f64, -1.0 + h * j as f64]);
        }
    }
    let mut t = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i < m / 2) == (j < m / 2) {
                t.push([a, b, c]);
                t.push([a, c, d]);
            } else {
                t.push([a, b, d]);
                t.push([b, c, d]);
            }
        }
    }
    (v, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_weights_reproduce_ball_measure() {
        for dim in 2..=5 {
            for mesh in [
                Mesh::radial_uniform(dim, 1.5, 37).unwrap(),
                Mesh::radial_graded(dim, 1.0, 200, 1e-4).unwrap(),
            ] {
                let total: f64 = mesh.qp_weights().iter().sum();
                let exact = mesh.domain_measure();
                assert!(
                    ((total - exact) / exact).abs() < 1e-10,
                    "dim {dim}: {total} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn radial_quadrature_is_exact_for_low_degree_away_from_the_origin() {
        let dim = 3;
        let mesh = Mesh::radial_uniform(dim, 1.0, 10).unwrap();
        let omega = unit_ball_measure(dim);
        let r1 = 0.1_f64;
        for deg in 0..=3 {
            let approx: f64 = (0..mesh.qp_count())
                .filter(|&q| mesh.qp_cell(q) > 0)
                .map(|q| mesh.qp_weight(q) * mesh.qp_point(q)[0].powi(deg))
                .sum();
            let k = (deg + dim as i32) as f64;
            let exact = dim as f64 * omega * (1.0 - r1.powf(k)) / k;
            assert!((approx - exact).abs() < 1e-13, "deg {deg}");
        }
    }

    #[test]
    fn disc_mesh_is_valid() {
        let mesh = Mesh::unit_disc(4).unwrap();
        assert!(mesh.cell_measure.iter().all(|a| *a > 0.0));
        let boundary: Vec<usize> = (0..mesh.node_count())
            .filter(|&i| mesh.is_boundary(i))
            .collect();
        assert_eq!(boundary.len(), 32);
        for &i in &boundary {
            assert!((mesh.node_radius(i) - 1.0).abs() < 1e-12);
        }
        assert!((mesh.domain_measure() - std::f64::consts::PI).abs() < 0.1);
    }

    #[test]
    fn planar_gradients_reproduce_linear_functions() {
        let mesh = Mesh::unit_square(3).unwrap();
        for c in 0..mesh.cell_count() {
            let mut g = [0.0; 2];
            for (a, &n) in mesh.cell(c).iter().enumerate() {
                let value = 2.0 * mesh.node(n)[0] - 3.0 * mesh.node(n)[1];
                g[0] += value * mesh.shape_grad(c, a)[0];
                g[1] += value * mesh.shape_grad(c, a)[1];
            }
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mesh = Mesh::unit_disc(2).unwrap();
        let (mut v, mut c) = (Vec::new(), Vec::new());
        mesh.write_csv(&mut v, &mut c).unwrap();
        let back = Mesh::read_csv(v.as_slice(), c.as_slice(), 2).unwrap();
        assert_eq!(back.node_count(), mesh.node_count());
        assert_eq!(back.boundary_flags(), mesh.boundary_flags());
        let radial = Mesh::radial_uniform(3, 1.0, 5).unwrap();
        let (mut v, mut c) = (Vec::new(), Vec::new());
        radial.write_csv(&mut v, &mut c).unwrap();
        let back = Mesh::read_csv(v.as_slice(), c.as_slice(), 3).unwrap();
        assert!((back.domain_measure() - radial.domain_measure()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cells_are_rejected() {
        assert!(Mesh::radial_from_nodes(2, vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Mesh::planar(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            None
        )
        .is_err());
    }
}
