//! Small dense row-major matrix and the handful of factorizations the crate needs.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("rows of unequal length".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in o_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "t_matmul ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b_row = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "matmul_t {}x{} by ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.rows, |i, j| {
            dot(self.row(i), other.row(j))
        }))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape("elementwise subtraction".into()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        })
    }

    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts the element type, e.g. `f64` to `f32`.
    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Orthonormalizes the rows of `m` in place with two passes of modified
/// Gram-Schmidt. Rows that are numerically dependent on earlier rows are
/// zeroed. Returns the number of non-zero rows kept.
pub fn orthonormalize_rows<T: Scalar>(m: &mut Matrix<T>) -> usize {
    let (rows, cols) = m.shape();
    let tol = T::epsilon() * T::lit(64.0);
    let mut kept = 0;
    for i in 0..rows {
        let original = norm(m.row(i));
        for _pass in 0..2 {
            for j in 0..i {
                let (head, tail) = m.as_mut_slice().split_at_mut(i * cols);
                let prev = &head[j * cols..(j + 1) * cols];
                let cur = &mut tail[..cols];
                let proj = dot(prev, cur);
                if proj != T::zero() {
                    for (c, &p) in cur.iter_mut().zip(prev) {
                        *c -= proj * p;
                    }
                }
            }
        }
        let n = norm(m.row(i));
        if original > T::zero() && n > tol * original {
            m.row_mut(i).iter_mut().for_each(|v| *v /= n);
            kept += 1;
        } else {
            m.row_mut(i).iter_mut().for_each(|v| *v = T::zero());
        }
    }
    kept
}

/// Orthonormal basis for the column space of `m` (columns kept in order,
/// dependent columns zeroed).
pub fn orthonormalize_columns<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut t = m.transpose();
    orthonormalize_rows(&mut t);
    t.transpose()
}

/// Thin singular value decomposition `A = U · diag(σ) · Vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// m×k left singular vectors.
    pub u: Matrix<T>,
    /// k singular values, non-increasing.
    pub singular_values: Vec<T>,
    /// n×k right singular vectors.
    pub v: Matrix<T>,
}

/// One-sided Jacobi SVD of an arbitrary m×n matrix, k = min(m, n).
///
/// Rotations are applied to the rows of whichever of `A`/`Aᵀ` is short and
/// wide, so every inner loop runs over contiguous memory. Singular vectors
/// belonging to zero singular values are zero.
pub fn jacobi_svd<T: Scalar>(a: &Matrix<T>) -> Svd<T> {
    if a.rows() <= a.cols() {
        // A = Rᵀ Σ W
        let (r, sigma, w) = row_jacobi(a.clone());
        Svd {
            u: r.transpose(),
            singular_values: sigma,
            v: w.transpose(),
        }
    } else {
        // Aᵀ = Rᵀ Σ W  ⇒  A = Wᵀ Σ R
        let (r, sigma, w) = row_jacobi(a.transpose());
        Svd {
            u: w.transpose(),
            singular_values: sigma,
            v: r.transpose(),
        }
    }
}

/// Orthogonalizes the rows of `work` (k×n, k ≤ n) by plane rotations.
/// Returns `(R, σ, W)` with `R` orthogonal k×k, `W` row-orthonormal k×n and
/// `work_in = Rᵀ · diag(σ) · W`, sorted by decreasing σ.
fn row_jacobi<T: Scalar>(mut work: Matrix<T>) -> (Matrix<T>, Vec<T>, Matrix<T>) {
    let (k, n) = work.shape();
    let mut rot = Matrix::<T>::identity(k);
    let eps = T::epsilon();
    let two = T::lit(2.0);
    const MAX_SWEEPS: usize = 60;

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let (alpha, beta, gamma) = {
                    let rp = work.row(p);
                    let rq = work.row(q);
                    (dot(rp, rp), dot(rq, rq), dot(rp, rq))
                };
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut work, p, q, c, s);
                rotate_rows(&mut rot, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<T> = (0..k).map(|i| norm(work.row(i))).collect();
    let smax = sigma.iter().copied().fold(T::zero(), T::max);
    let floor = smax * eps * T::from_usize_lossy(n.max(k));
    for i in 0..k {
        let s = sigma[i];
        if s > floor && s > T::zero() {
            work.row_mut(i).iter_mut().for_each(|v| *v /= s);
        } else {
            sigma[i] = T::zero();
            work.row_mut(i).iter_mut().for_each(|v| *v = T::zero());
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma_sorted = order.iter().map(|&i| sigma[i]).collect();
    (rot.select_rows(&order), sigma_sorted, work.select_rows(&order))
}

#[inline]
fn rotate_rows<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let cols = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let b = Matrix::from_fn(4, 2, |i, j| (i as f64) * 0.5 - j as f64);
        let ab = a.matmul(&b).unwrap();
        let ab2 = a.transpose().t_matmul(&b).unwrap();
        let ab3 = a.matmul_t(&b.transpose()).unwrap();
        assert_eq!(ab, ab2);
        assert_eq!(ab, ab3);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn jacobi_reconstructs_tall_and_wide() {
        for &(m, n) in &[(5usize, 3usize), (3, 7), (4, 4)] {
            let a = Matrix::from_fn(m, n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7 + (i as f64) * 0.1);
            let svd = jacobi_svd(&a);
            let k = m.min(n);
            assert_eq!(svd.singular_values.len(), k);
            let us = Matrix::from_fn(m, k, |i, j| svd.u[(i, j)] * svd.singular_values[j]);
            let rec = us.matmul_t(&svd.v).unwrap();
            for (x, y) in rec.as_slice().iter().zip(a.as_slice()) {
                assert!(approx(*x, *y, 1e-12), "{x} vs {y}");
            }
            for w in svd.singular_values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn rank_deficient_gets_zero_singular_values() {
        let a = Matrix::from_fn(4, 3, |i, _| i as f64 + 1.0);
        let svd = jacobi_svd(&a);
        assert!(svd.singular_values[0] > 1.0);
        assert_eq!(svd.singular_values[1], 0.0);
        assert_eq!(svd.singular_values[2], 0.0);
    }

    #[test]
    fn orthonormalize_drops_dependent_rows() {
        let mut m = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(orthonormalize_rows(&mut m), 2);
        assert_eq!(m.row(1), &[0.0, 0.0, 0.0]);
        assert!(approx(dot(m.row(0), m.row(2)), 0.0, 1e-15));
        assert!(approx(norm(m.row(2)), 1.0, 1e-15));
    }
}
