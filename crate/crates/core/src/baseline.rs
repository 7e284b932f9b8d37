//! Latent-space comparator: a truncated randomized SVD fitted on every row,
//! followed by multinomial softmax regression on the labelled rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{argmax_rows, data_loss, softmax_rows};
use crate::linalg::{dot, jacobi_svd, norm, orthonormalize_columns, Matrix};
use crate::scalar::Scalar;

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;

/// `min(64, N−1, D)`, at least 1.
pub fn default_rank(n: usize, d: usize) -> usize {
    64.min(n.saturating_sub(1)).min(d).max(1)
}

/// Right singular subspace of a data matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdProjection<T> {
    /// D×r, orthonormal columns.
    pub components: Matrix<T>,
    /// Non-increasing, length r.
    pub singular_values: Vec<T>,
}

impl<T: Scalar> SvdProjection<T> {
    pub fn rank(&self) -> usize {
        self.components.cols()
    }
}

/// Rank-`rank` randomized SVD: Gaussian sketch of width `rank + oversample`,
/// `power_iters` rounds of subspace iteration, then an exact SVD of the small
/// projected matrix. When `x` has lower rank than requested, the missing
/// directions are filled with an orthonormal completion and zero singular
/// values.
pub fn randomized_svd<T: Scalar>(
    x: &Matrix<T>,
    rank: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<SvdProjection<T>> {
    let (n, d) = x.shape();
    if rank < 1 || rank > n.min(d) {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} outside 1..={} for a {n}×{d} matrix",
            n.min(d)
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let width = (rank + oversample).min(n.min(d));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Matrix::from_fn(d, width, |_, _| T::lit(StandardNormal.sample(&mut rng)));

    let mut q = orthonormalize_columns(&x.matmul(&omega)?);
    for _ in 0..power_iters {
        let z = orthonormalize_columns(&x.t_matmul(&q)?);
        q = orthonormalize_columns(&x.matmul(&z)?);
    }
    // B = Qᵀ X is width×D; its right singular vectors approximate those of X.
    let b = q.t_matmul(x)?;
    let svd = jacobi_svd(&b);
    let mut components = Matrix::from_fn(d, rank, |i, j| svd.v[(i, j)]);
    let singular_values = svd.singular_values[..rank].to_vec();
    complete_orthonormal_columns(&mut components);
    Ok(SvdProjection {
        components,
        singular_values,
    })
}

/// Replaces zero columns of a matrix whose non-zero columns are orthonormal
/// with unit vectors orthogonal to every other column.
fn complete_orthonormal_columns<T: Scalar>(m: &mut Matrix<T>) {
    let (d, r) = m.shape();
    let mut cols: Vec<Vec<T>> = (0..r).map(|j| m.column(j)).collect();
    let mut basis = 0;
    for j in 0..r {
        if norm(&cols[j]) > T::zero() {
            continue;
        }
        while basis < d {
            let mut v = vec![T::zero(); d];
            v[basis] = T::one();
            basis += 1;
            for _pass in 0..2 {
                for (k, other) in cols.iter().enumerate() {
                    if k == j {
                        continue;
                    }
                    let p = dot(other, &v);
                    v.iter_mut().zip(other).for_each(|(a, &o)| *a -= p * o);
                }
            }
            let len = norm(&v);
            if len > T::lit(0.5) {
                v.iter_mut().for_each(|a| *a /= len);
                cols[j] = v;
                break;
            }
        }
    }
    *m = Matrix::from_fn(d, r, |i, j| cols[j][i]);
}

/// `x · components`.
pub fn project<T: Scalar>(p: &SvdProjection<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    if x.cols() != p.components.rows() {
        return Err(Error::Shape(format!(
            "projection expects {} columns, got {}",
            p.components.rows(),
            x.cols()
        )));
    }
    x.matmul(&p.components)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftmaxConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2: 1e-4,
            epochs: 500,
        }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParameter("l2 must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Multinomial logistic regression; the last weight row is the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxRegression<T> {
    /// (r+1)×C.
    pub weights: Matrix<T>,
}

impl<T: Scalar> SoftmaxRegression<T> {
    pub fn zeros(r: usize, c: usize) -> Self {
        Self {
            weights: Matrix::zeros(r + 1, c),
        }
    }

    pub fn logits(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        let r = self.weights.rows() - 1;
        if z.cols() != r {
            return Err(Error::Shape(format!("model expects {r} features, got {}", z.cols())));
        }
        let mut out = z.matmul(&Matrix::from_fn(r, self.weights.cols(), |i, j| self.weights[(i, j)]))?;
        let bias = self.weights.row(r).to_vec();
        for i in 0..out.rows() {
            out.row_mut(i).iter_mut().zip(&bias).for_each(|(o, &b)| *o += b);
        }
        Ok(out)
    }

    pub fn predict_proba(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(softmax_rows(&self.logits(z)?))
    }

    pub fn predict(&self, z: &Matrix<T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(z)?))
    }
}

/// Masked mean cross-entropy plus `(l2/2)·‖W‖²` over the non-bias rows, and
/// its gradient.
pub fn softmax_loss_grad<T: Scalar>(
    model: &SoftmaxRegression<T>,
    z: &Matrix<T>,
    labels: &[usize],
    mask: &[usize],
    l2: T,
) -> Result<(T, Matrix<T>)> {
    let logits = model.logits(z)?;
    let r = z.cols();
    let c = model.weights.cols();
    let mut loss = data_loss(&logits, labels, mask)?;
    let probs = softmax_rows(&logits);
    let scale = T::one() / T::from_usize_lossy(mask.len());
    let mut grad = Matrix::zeros(r + 1, c);
    for &i in mask {
        let mut g: Vec<T> = probs.row(i).iter().map(|&p| p * scale).collect();
        g[labels[i]] -= scale;
        for (f, &zf) in z.row(i).iter().enumerate() {
            grad.row_mut(f).iter_mut().zip(&g).for_each(|(w, &gk)| *w += zf * gk);
        }
        grad.row_mut(r).iter_mut().zip(&g).for_each(|(w, &gk)| *w += gk);
    }
    let mut reg = T::zero();
    for f in 0..r {
        for k in 0..c {
            let w = model.weights[(f, k)];
            reg += w * w;
            grad[(f, k)] += l2 * w;
        }
    }
    loss += l2 * T::lit(0.5) * reg;
    Ok((loss, grad))
}

/// Full-batch gradient descent from zero weights. Deterministic.
pub fn softmax_regression_train<T: Scalar>(
    z: &Matrix<T>,
    labels: &[usize],
    n_classes: usize,
    mask: &[usize],
    cfg: &SoftmaxConfig,
) -> Result<SoftmaxRegression<T>> {
    cfg.validate()?;
    if mask.is_empty() {
        return Err(Error::Mask("training mask is empty".into()));
    }
    let mut seen = vec![false; n_classes];
    for &i in mask {
        if i >= z.rows() || i >= labels.len() || labels[i] >= n_classes {
            return Err(Error::Mask(format!("masked node {i} is out of range")));
        }
        seen[labels[i]] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Mask(format!("class {k} has no training row")));
    }
    let lr = T::lit(cfg.learning_rate);
    let l2 = T::lit(cfg.l2);
    let mut model = SoftmaxRegression::zeros(z.cols(), n_classes);
    for _ in 0..cfg.epochs {
        let (_, grad) = softmax_loss_grad(&model, z, labels, mask, l2)?;
        model
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .for_each(|(w, &g)| *w -= lr * g);
    }
    Ok(model)
}

/// Z-scores every column using all rows; constant columns become 0.
pub fn zscore_columns<T: Scalar>(z: &Matrix<T>) -> Matrix<T> {
    let (n, r) = z.shape();
    let nf = T::from_usize_lossy(n);
    let mut out = z.clone();
    for j in 0..r {
        let col = z.column(j);
        let mean = col.iter().copied().sum::<T>() / nf;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
        let sd = var.sqrt();
        for i in 0..n {
            out[(i, j)] = if sd > T::zero() {
                (col[i] - mean) / sd
            } else {
                T::zero()
            };
        }
    }
    out
}
