//! Compressed sparse row storage and a banded LU direct solver.
//!
//! The solver reorders unknowns with reverse Cuthill-McKee and factors the
//! permuted matrix as a band with partial pivoting. On the structured meshes
//! used here that keeps 1D systems tridiagonal and 2D bandwidths near `sqrt(n)`.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given per-row column sets.
    pub fn from_pattern(n: usize, mut rows: Vec<Vec<usize>>) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let mut m = CsrMatrix::from_pattern(n, rows);
        for &(i, j, v) in triplets {
            let p = m.position(i, j).unwrap();
            m.values[p] += v;
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map(|p| self.values[p]).unwrap_or(0.0)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn clear_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn has_symmetric_pattern(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, _)| j < self.n && self.position(j, i).is_some()))
    }
}

/// Reverse Cuthill-McKee ordering of the (symmetrised) graph of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for nb in adj.iter_mut() {
        nb.sort_unstable();
        nb.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let bfs_levels = |start: usize, visited: &[bool]| -> Vec<usize> {
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        let mut order = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !visited[w] && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let far = order.iter().copied().max_by_key(|&v| (dist[v], usize::MAX - degree[v]));
        vec![far.unwrap_or(start)]
    };

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree[v], v)).unwrap();
        // Two sweeps towards a pseudo-peripheral node.
        let mut start = seed;
        for _ in 0..2 {
            start = bfs_levels(start, &visited)[0];
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Half-bandwidth of `a` under the ordering `perm` (`perm[new] = old`).
pub fn bandwidth(a: &CsrMatrix, perm: &[usize]) -> usize {
    let mut inv = vec![0; a.n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    (0..a.n)
        .flat_map(|i| a.row(i).map(move |(j, _)| (i, j)))
        .map(|(i, j)| inv[i].abs_diff(inv[j]))
        .max()
        .unwrap_or(0)
}

/// Banded LU factorisation `P B = L U` of a symmetrically permuted sparse
/// matrix `B = Q A Q^T`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    perm: Vec<usize>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix, perm: &[usize]) -> Result<BandedLu> {
        let n = a.n;
        let bw = bandwidth(a, perm);
        let (kl, ku) = (bw, bw);
        let width = 2 * kl + ku + 1;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut upper = vec![0.0; n * width];
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in a.row(old_i) {
                upper[at(i, inv[old_j])] += v;
            }
        }
        let scale = a.norm_inf();
        if !scale.is_finite() {
            return Err(Error::SingularMatrix("matrix has non-finite entries".into()));
        }
        let tiny = scale * f64::EPSILON;

        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = upper[at(k, k)].abs();
            for i in (k + 1)..=last_row {
                let v = upper[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny || !best.is_finite() {
                return Err(Error::SingularMatrix(format!("zero pivot in column {k} of {n}")));
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    upper.swap(at(k, j), at(p, j));
                }
            }
            let d = upper[at(k, k)];
            for i in (k + 1)..=last_row {
                let l = upper[at(i, k)] / d;
                lower[k * kl + (i - k - 1)] = l;
                upper[at(i, k)] = 0.0;
                if l != 0.0 {
                    for j in (k + 1)..=last_col {
                        upper[at(i, j)] -= l * upper[at(k, j)];
                    }
                }
            }
        }
        Ok(BandedLu { n, kl, ku, width, perm: perm.to_vec(), upper, lower, pivots })
    }

    pub fn half_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        let mut c: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                c.swap(k, p);
            }
            let ck = c[k];
            if ck != 0.0 {
                for t in 0..kl.min(n - 1 - k) {
                    c[k + 1 + t] -= self.lower[k * kl + t] * ck;
                }
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + kl + ku).min(n - 1);
            let mut s = c[i];
            for j in (i + 1)..=last_col {
                s -= self.upper[at(i, j)] * c[j];
            }
            c[i] = s / self.upper[at(i, i)];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = c[new];
        }
        x
    }
}

/// Dense LU solve used for small or dense systems.
pub fn dense_solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > scale * f64::EPSILON) {
        return Err(Error::SingularMatrix(format!("dense {n}x{n} matrix is singular to working precision")));
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    lu.solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::SingularMatrix(format!("dense {n}x{n} solve failed")))
}
