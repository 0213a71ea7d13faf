use ndarray::{Array2, ArrayView2};

use super::{SvgError, TypedEdge};

/// Symmetric binary adjacency with zero diagonal, stored as sorted
/// neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: &[TypedEdge]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for e in edges {
            if e.src == e.dst {
                continue;
            }
            neighbors[e.src].push(e.dst);
            neighbors[e.dst].push(e.src);
        }
        for row in &mut neighbors {
            row.sort_unstable();
            row.dedup();
        }
        Adjacency { neighbors }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Number of connected unordered pairs.
    pub fn pair_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut a = Array2::zeros((n, n));
        for (i, row) in self.neighbors.iter().enumerate() {
            for &j in row {
                a[[i, j]] = 1.0;
            }
        }
        a
    }

    /// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
    pub fn normalize(&self) -> NormalizedAdjacency {
        let inv_sqrt: Vec<f64> = self
            .neighbors
            .iter()
            .map(|row| 1.0 / ((row.len() + 1) as f64).sqrt())
            .collect();
        let mut row_ptr = Vec::with_capacity(self.n() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, row) in self.neighbors.iter().enumerate() {
            let mut placed_diag = false;
            for &j in row {
                if !placed_diag && j > i {
                    cols.push(i);
                    vals.push(inv_sqrt[i] * inv_sqrt[i]);
                    placed_diag = true;
                }
                cols.push(j);
                vals.push(inv_sqrt[i] * inv_sqrt[j]);
            }
            if !placed_diag {
                cols.push(i);
                vals.push(inv_sqrt[i] * inv_sqrt[i]);
            }
            row_ptr.push(cols.len());
        }
        NormalizedAdjacency { row_ptr, cols, vals }
    }
}

/// Normalized adjacency `A*` in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn identity(n: usize) -> Self {
        NormalizedAdjacency {
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for (j, v) in self.row(i) {
                a[[i, j]] = v;
            }
        }
        a
    }

    /// `A* · x` for an `n × k` matrix `x`. `A*` is symmetric, so this is also
    /// `A*ᵀ · x`.
    pub fn matmul(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n(), x.ncols()));
        for i in 0..self.n() {
            let mut dst = out.row_mut(i);
            for (j, v) in self.row(i) {
                dst.scaled_add(v, &x.row(j));
            }
        }
        out
    }

    /// Same matrix with rows and columns relabelled: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                rows[perm[i]].push((perm[j], v));
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut r in rows {
            r.sort_by_key(|&(c, _)| c);
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        NormalizedAdjacency { row_ptr, cols, vals }
    }
}

/// Normalizes a dense binary adjacency matrix.
pub fn normalize_adjacency(a: &Array2<f64>) -> Result<NormalizedAdjacency, SvgError> {
    let (n, m) = a.dim();
    if n != m {
        return Err(SvgError::NonSymmetricInput);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a[[i, j]] != a[[j, i]] {
                return Err(SvgError::NonSymmetricInput);
            }
        }
    }
    let degree: Vec<f64> = (0..n)
        .map(|i| a.row(i).sum() - a[[i, i]] + 1.0)
        .collect();
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let hat = if i == j { 1.0 } else { a[[i, j]] };
            if hat != 0.0 {
                cols.push(j);
                vals.push(hat / (degree[i].sqrt() * degree[j].sqrt()));
            }
        }
        row_ptr.push(cols.len());
    }
    Ok(NormalizedAdjacency { row_ptr, cols, vals })
}
