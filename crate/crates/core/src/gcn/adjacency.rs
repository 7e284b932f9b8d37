use crate::error::{Error, Result};
use crate::latent_graph::LatentGraph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Symmetrically normalized adjacency `D^{-1/2} (A [+ I]) D^{-1/2}` in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct NormAdjacency<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    degrees: Vec<usize>,
    self_loops: bool,
}

/// Entry `(v, u)` becomes `1/√(deg(v)·deg(u))`. With `self_loops`, every node
/// first gets an edge to itself, so degrees count the node too and an isolated
/// node keeps its own features. Without, isolated nodes have empty rows.
pub fn normalize_adjacency<T: Scalar>(g: &LatentGraph<T>, self_loops: bool) -> NormAdjacency<T> {
    let n = g.n();
    let mut adj = g.neighbors();
    if self_loops {
        for (v, list) in adj.iter_mut().enumerate() {
            let at = list.partition_point(|&u| u < v);
            list.insert(at, v);
        }
    }
    let degrees: Vec<usize> = adj.iter().map(Vec::len).collect();
    let inv_sqrt: Vec<T> = degrees
        .iter()
        .map(|&d| {
            if d == 0 {
                T::zero()
            } else {
                T::one() / T::from_usize_lossy(d).sqrt()
            }
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for (v, list) in adj.iter().enumerate() {
        for &u in list {
            col_idx.push(u);
            values.push(inv_sqrt[v] * inv_sqrt[u]);
        }
        row_ptr.push(col_idx.len());
    }
    NormAdjacency {
        n,
        row_ptr,
        col_idx,
        values,
        degrees,
        self_loops,
    }
}

impl<T: Scalar> NormAdjacency<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Degrees including the self-loop when enabled.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    /// Stored `(column, value)` pairs of row `v`, ascending by column.
    pub fn row(&self, v: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[v]..self.row_ptr[v + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, v: usize, u: usize) -> T {
        self.row(v).find(|&(c, _)| c == u).map_or(T::zero(), |(_, x)| x)
    }

    /// Sparse × dense product `Â · x`. Each output row is summed in the fixed
    /// column order of the CSR row.
    pub fn spmm(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.rows() != self.n {
            return Err(Error::Shape(format!(
                "adjacency over {} nodes applied to {} rows",
                self.n,
                x.rows()
            )));
        }
        let mut out = Matrix::zeros(self.n, x.cols());
        for v in 0..self.n {
            let span = self.row_ptr[v]..self.row_ptr[v + 1];
            for (&u, &a) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                let src = x.row(u);
                for (o, &s) in out.row_mut(v).iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.n, self.n);
        for v in 0..self.n {
            for (u, a) in self.row(v) {
                m[(v, u)] = a;
            }
        }
        m
    }
}
