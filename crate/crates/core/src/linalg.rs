//! Sparse matrices on a fixed pattern and a banded LU with partial pivoting.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::SparsityPattern;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        Self {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        for s in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
            self.values[s] = if self.pattern.col_idx[s] == i {
                1.0
            } else {
                0.0
            };
        }
    }

    /// Replaces row and column `i` by the identity row and column.
    pub fn set_identity_row_col(&mut self, i: usize) {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        for s in r {
            let j = self.pattern.col_idx[s];
            self.values[s] = if j == i { 1.0 } else { 0.0 };
            if j != i {
                if let Some(t) = self.pattern.slot(j, i) {
                    self.values[t] = 0.0;
                }
            }
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n()) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.matvec(x, &mut y);
        y
    }

    /// `self^T x`
    pub fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        for (i, xi) in x.iter().enumerate().take(self.n()) {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `self + a·other` on the same pattern.
    pub fn add_scaled(&self, a: f64, other: &CsrMatrix) -> CsrMatrix {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        CsrMatrix {
            pattern: self.pattern.clone(),
            values,
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n() {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn lu(&self, ordering: Option<&[usize]>) -> Result<BandedLu> {
        BandedLu::factor(self, ordering)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.lu(None)?.solve(b)
    }
}

/// Reverse Cuthill–McKee ordering of the pattern; `perm[new] = old`.
pub fn reverse_cuthill_mckee(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.n();
    let degree = |i: usize| pattern.row_ptr[i + 1] - pattern.row_ptr[i];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree(i))
            .unwrap();
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let mut next: Vec<usize> = pattern.col_idx[pattern.row_ptr[i]..pattern.row_ptr[i + 1]]
                .iter()
                .copied()
                .filter(|&j| !visited[j])
                .collect();
            next.sort_by_key(|&j| degree(j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Lower and upper bandwidths of the pattern under `perm` (`perm[new] = old`).
pub fn bandwidths(pattern: &SparsityPattern, perm: Option<&[usize]>) -> (usize, usize) {
    let n = pattern.n();
    let inverse = perm.map(|p| {
        let mut inv = vec![0; n];
        for (new, &old) in p.iter().enumerate() {
            inv[old] = new;
        }
        inv
    });
    let map = |i: usize| inverse.as_ref().map_or(i, |inv| inv[i]);
    let (mut kl, mut ku) = (0, 0);
    for i in 0..n {
        for &j in &pattern.col_idx[pattern.row_ptr[i]..pattern.row_ptr[i + 1]] {
            let (a, b) = (map(i), map(j));
            if a > b {
                kl = kl.max(a - b);
            } else {
                ku = ku.max(b - a);
            }
        }
    }
    (kl, ku)
}

/// Banded LU with partial pivoting; row `i` stores columns
/// `i - kl ..= i + kl + ku` to hold pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
    perm: Option<Vec<usize>>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix, ordering: Option<&[usize]>) -> Result<Self> {
        let n = a.n();
        let (kl, ku) = bandwidths(a.pattern(), ordering);
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            pivots: vec![0; n],
            perm: ordering.map(<[usize]>::to_vec),
        };
        let inverse = ordering.map(|p| {
            let mut inv = vec![0; n];
            for (new, &old) in p.iter().enumerate() {
                inv[old] = new;
            }
            inv
        });
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (ni, nj) = match &inverse {
                    Some(inv) => (inv[i], inv[j]),
                    None => (i, j),
                };
                let k = lu.idx(ni, nj);
                lu.band[k] += v;
            }
        }
        let scale = a.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        lu.eliminate(scale)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self, scale: f64) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        let floor = scale * f64::EPSILON * 1e-3;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.band[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > floor) {
                return Err(Error::SingularMatrix { row: k });
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let m = self.band[ik] / pivot;
                self.band[ik] = m;
                if m == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let (ij, kj) = (self.idx(i, j), self.idx(k, j));
                    self.band[ij] -= m * self.band[kj];
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::InvalidArgument(format!(
                "rhs length {} for system of size {n}",
                b.len()
            )));
        }
        let mut x: Vec<f64> = match &self.perm {
            Some(p) => p.iter().map(|&old| b[old]).collect(),
            None => b.to_vec(),
        };
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    x[i] -= self.band[self.idx(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.band[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.band[self.idx(k, k)];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { row: n });
        }
        Ok(match &self.perm {
            Some(p) => {
                let mut out = vec![0.0; n];
                for (new, &old) in p.iter().enumerate() {
                    out[old] = x[new];
                }
                out
            }
            None => x,
        })
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern_of(n: usize, entries: &[(usize, usize)]) -> Arc<SparsityPattern> {
        let mut rows = vec![std::collections::BTreeSet::new(); n];
        for &(i, j) in entries {
            rows[i].insert(j);
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for r in rows {
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Arc::new(SparsityPattern { row_ptr, col_idx })
    }

    #[test]
    fn tridiagonal_solve_with_pivoting() {
        let n = 6;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i));
            if i + 1 < n {
                entries.push((i, i + 1));
                entries.push((i + 1, i));
            }
        }
        let mut a = CsrMatrix::zeros(pattern_of(n, &entries));
        for i in 0..n {
            let s = a.pattern().slot(i, i).unwrap();
            // zero diagonal at row 0 forces a row swap
            a.values_mut()[s] = if i == 0 { 0.0 } else { 4.0 };
            if i + 1 < n {
                let s = a.pattern().slot(i, i + 1).unwrap();
                a.values_mut()[s] = 1.0 + i as f64;
                let s = a.pattern().slot(i + 1, i).unwrap();
                a.values_mut()[s] = -2.0;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.5).collect();
        let b = a.mul(&x_true);
        let x = a.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rcm_ordering_gives_same_solution() {
        let n = 9;
        let mut entries: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for &(i, j) in &[
            (0, 8),
            (8, 4),
            (4, 2),
            (2, 6),
            (6, 1),
            (1, 7),
            (7, 3),
            (3, 5),
        ] {
            entries.push((i, j));
            entries.push((j, i));
        }
        let pattern = pattern_of(n, &entries);
        let mut a = CsrMatrix::zeros(pattern.clone());
        for &(i, j) in &entries {
            let s = pattern.slot(i, j).unwrap();
            a.values_mut()[s] = if i == j { 3.0 } else { -1.0 };
        }
        let perm = reverse_cuthill_mckee(&pattern);
        let (kl, ku) = bandwidths(&pattern, Some(&perm));
        assert_eq!((kl, ku), (1, 1));
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x1 = a.lu(None).unwrap().solve(&b).unwrap();
        let x2 = a.lu(Some(&perm)).unwrap().solve(&b).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let pattern = pattern_of(2, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        let mut a = CsrMatrix::zeros(pattern);
        a.values_mut().copy_from_slice(&[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            a.solve(&[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }
}
