use std::borrow::Cow;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::adjacency::NormAdjacency;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Two-layer graph convolutional network without bias terms.
///
/// `H1 = relu(Â·X·W1)`, then `logits = Â·H1·W2` when `head_propagation` is on
/// (the usual two-layer GCN) or `logits = H1·W2` when it is off.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel<T> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
    pub head_propagation: bool,
    pub seed: u64,
}

/// Glorot-uniform initialization: entries uniform in `±√(6/(fan_in+fan_out))`.
pub fn init_model<T: Scalar>(d: usize, h: usize, c: usize, seed: u64) -> GcnModel<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w1 = glorot(d, h, &mut rng);
    let w2 = glorot(h, c, &mut rng);
    GcnModel {
        w1,
        w2,
        head_propagation: true,
        seed,
    }
}

fn glorot<T: Scalar>(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("positive limit");
    Matrix::from_fn(fan_in, fan_out, |_, _| T::lit(dist.sample(rng)))
}

impl<T: Scalar> GcnModel<T> {
    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.cols()
    }

    pub fn zeros(d: usize, h: usize, c: usize) -> Self {
        Self {
            w1: Matrix::zeros(d, h),
            w2: Matrix::zeros(h, c),
            head_propagation: true,
            seed: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.w1.cols() != self.w2.rows() {
            return Err(Error::Shape(format!(
                "W1 is {}x{} but W2 is {}x{}",
                self.w1.rows(),
                self.w1.cols(),
                self.w2.rows(),
                self.w2.cols()
            )));
        }
        Ok(())
    }

    pub fn l2_sq(&self) -> T {
        self.w1.frobenius_sq() + self.w2.frobenius_sq()
    }
}

/// Intermediate activations of one forward pass, as needed by [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache<'a, T: Clone> {
    pub adj: &'a NormAdjacency<T>,
    /// `Â·X`
    pub ax: Cow<'a, Matrix<T>>,
    /// `Â·X·W1` before the activation.
    pub z1: Matrix<T>,
    /// Hidden activations after relu (and dropout, when training with it).
    pub h1: Matrix<T>,
    /// Inverted-dropout multipliers applied to `h1`, if any.
    pub dropout_scale: Option<Matrix<T>>,
    /// Input to the classification head: `Â·H1` or `H1`.
    pub head_in: Matrix<T>,
    pub logits: Matrix<T>,
}

pub fn forward<'a, T: Scalar>(
    model: &GcnModel<T>,
    adj: &'a NormAdjacency<T>,
    x: &Matrix<T>,
) -> Result<(Matrix<T>, ForwardCache<'a, T>)> {
    let ax = adj.spmm(x)?;
    let cache = forward_propagated(model, adj, Cow::Owned(ax), None)?;
    Ok((cache.logits.clone(), cache))
}

/// Forward pass from precomputed `Â·X`, which is constant across epochs.
/// `dropout` is `(rate, rng)`; rate 0 or `None` disables it.
pub fn forward_propagated<'a, T: Scalar>(
    model: &GcnModel<T>,
    adj: &'a NormAdjacency<T>,
    ax: Cow<'a, Matrix<T>>,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<ForwardCache<'a, T>> {
    model.check()?;
    if ax.rows() != adj.n() {
        return Err(Error::Shape(format!(
            "{} propagated rows for {} nodes",
            ax.rows(),
            adj.n()
        )));
    }
    let z1 = ax.matmul(&model.w1)?;
    let mut h1 = z1.map(|v| v.max(T::zero()));
    let dropout_scale = match dropout {
        Some((rate, rng)) if rate > 0.0 => {
            let keep = 1.0 - rate;
            let scale = T::lit(1.0 / keep);
            let mask = Matrix::from_fn(h1.rows(), h1.cols(), |_, _| {
                if rng.random::<f64>() < keep {
                    scale
                } else {
                    T::zero()
                }
            });
            for (h, &m) in h1.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *h *= m;
            }
            Some(mask)
        }
        _ => None,
    };
    let head_in = if model.head_propagation {
        adj.spmm(&h1)?
    } else {
        h1.clone()
    };
    let logits = head_in.matmul(&model.w2)?;
    Ok(ForwardCache {
        adj,
        ax,
        z1,
        h1,
        dropout_scale,
        head_in,
        logits,
    })
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    p
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

fn check_mask(mask: &[usize], n: usize, labels: &[usize], c: usize) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::Mask("empty mask".into()));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} nodes", labels.len())));
    }
    for &i in mask {
        if i >= n {
            return Err(Error::Mask(format!("node {i} out of range for {n} nodes")));
        }
        if labels[i] >= c {
            return Err(Error::Mask(format!("label {} of node {i} outside 0..{c}", labels[i])));
        }
    }
    Ok(())
}

/// Mean cross-entropy over the masked nodes.
pub fn data_loss<T: Scalar>(logits: &Matrix<T>, labels: &[usize], mask: &[usize]) -> Result<T> {
    check_mask(mask, logits.rows(), labels, logits.cols())?;
    let total: T = mask
        .iter()
        .map(|&i| {
            let row = logits.row(i);
            log_sum_exp(row) - row[labels[i]]
        })
        .sum();
    Ok(total / T::from_usize_lossy(mask.len()))
}

/// Masked mean cross-entropy plus `(weight_decay/2)·(‖W1‖² + ‖W2‖²)`.
pub fn loss<T: Scalar>(
    logits: &Matrix<T>,
    labels: &[usize],
    mask: &[usize],
    model: &GcnModel<T>,
    weight_decay: T,
) -> Result<T> {
    Ok(data_loss(logits, labels, mask)? + weight_decay * T::lit(0.5) * model.l2_sq())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
}

/// Analytic gradient of [`loss`] with respect to both weight matrices.
pub fn backward<T: Scalar>(
    cache: &ForwardCache<'_, T>,
    labels: &[usize],
    mask: &[usize],
    model: &GcnModel<T>,
    weight_decay: T,
) -> Result<Gradients<T>> {
    model.check()?;
    let (n, c) = cache.logits.shape();
    if c != model.n_classes()
        || cache.z1.cols() != model.hidden_dim()
        || cache.ax.cols() != model.input_dim()
        || cache.head_in.cols() != model.hidden_dim()
    {
        return Err(Error::Shape("forward cache does not match model".into()));
    }
    check_mask(mask, n, labels, c)?;

    // dL/dlogits: (softmax − onehot)/|mask| on masked rows
    let probs = softmax_rows(&cache.logits);
    let inv_m = T::one() / T::from_usize_lossy(mask.len());
    let mut g = Matrix::zeros(n, c);
    for &i in mask {
        let dst = g.row_mut(i);
        for (k, (d, &p)) in dst.iter_mut().zip(probs.row(i)).enumerate() {
            let onehot = if k == labels[i] { T::one() } else { T::zero() };
            *d += (p - onehot) * inv_m;
        }
    }

    let mut dw2 = cache.head_in.t_matmul(&g)?;
    let d_head_in = g.matmul_t(&model.w2)?;
    // Â is symmetric, so Âᵀ·dP = Â·dP
    let mut d_h1 = if model.head_propagation {
        cache.adj.spmm(&d_head_in)?
    } else {
        d_head_in
    };
    if let Some(scale) = &cache.dropout_scale {
        for (d, &s) in d_h1.as_mut_slice().iter_mut().zip(scale.as_slice()) {
            *d *= s;
        }
    }
    for (d, &z) in d_h1.as_mut_slice().iter_mut().zip(cache.z1.as_slice()) {
        if z <= T::zero() {
            *d = T::zero();
        }
    }
    let mut dw1 = cache.ax.t_matmul(&d_h1)?;

    for (d, &w) in dw1.as_mut_slice().iter_mut().zip(model.w1.as_slice()) {
        *d += weight_decay * w;
    }
    for (d, &w) in dw2.as_mut_slice().iter_mut().zip(model.w2.as_slice()) {
        *d += weight_decay * w;
    }
    Ok(Gradients { w1: dw1, w2: dw2 })
}

/// Class probabilities and arg-max labels (ties go to the lowest class index).
pub fn predict<T: Scalar>(
    model: &GcnModel<T>,
    adj: &NormAdjacency<T>,
    x: &Matrix<T>,
) -> Result<(Matrix<T>, Vec<usize>)> {
    let (logits, _) = forward(model, adj, x)?;
    let probs = softmax_rows(&logits);
    let labels = argmax_rows(&probs);
    Ok((probs, labels))
}

pub fn argmax_rows<T: Scalar>(m: &Matrix<T>) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

const CHECKPOINT_FORMAT: &str = "tabgraph-gcn";
const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model: dimensions, seed and both weight matrices as row-major f64.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    n_classes: usize,
    head_propagation: bool,
    seed: u64,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl<T: Scalar> GcnModel<T> {
    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_dim: self.input_dim(),
            hidden_dim: self.hidden_dim(),
            n_classes: self.n_classes(),
            head_propagation: self.head_propagation,
            seed: self.seed,
            w1: self.w1.as_slice().iter().map(|v| v.as_f64()).collect(),
            w2: self.w2.as_slice().iter().map(|v| v.as_f64()).collect(),
        };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        if ck.input_dim == 0 || ck.hidden_dim == 0 || ck.n_classes == 0 {
            return Err(Error::Checkpoint("zero dimension".into()));
        }
        let to_t = |v: Vec<f64>| -> Result<Vec<T>> {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Checkpoint("non-finite weight".into()));
            }
            Ok(v.into_iter().map(T::lit).collect())
        };
        let w1 = Matrix::from_vec(ck.input_dim, ck.hidden_dim, to_t(ck.w1)?)
            .map_err(|_| Error::Checkpoint("W1 length does not match dimensions".into()))?;
        let w2 = Matrix::from_vec(ck.hidden_dim, ck.n_classes, to_t(ck.w2)?)
            .map_err(|_| Error::Checkpoint("W2 length does not match dimensions".into()))?;
        Ok(Self {
            w1,
            w2,
            head_propagation: ck.head_propagation,
            seed: ck.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
