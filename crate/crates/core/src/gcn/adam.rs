use crate::scalar::Scalar;

use super::model::{GcnModel, Gradients};
use crate::linalg::Matrix;

/// First and second moment estimates for both weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub t: u64,
    m1: Matrix<T>,
    v1: Matrix<T>,
    m2: Matrix<T>,
    v2: Matrix<T>,
}

impl<T: Scalar> AdamState<T> {
    /// β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(model: &GcnModel<T>) -> Self {
        let (d, h) = model.w1.shape();
        let c = model.w2.cols();
        Self {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            t: 0,
            m1: Matrix::zeros(d, h),
            v1: Matrix::zeros(d, h),
            m2: Matrix::zeros(h, c),
            v2: Matrix::zeros(h, c),
        }
    }
}

/// One bias-corrected Adam update of both weight matrices. Weight decay, if
/// any, is expected to already be folded into `grads`.
pub fn adam_step<T: Scalar>(state: &mut AdamState<T>, model: &mut GcnModel<T>, grads: &Gradients<T>, learning_rate: T) {
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = T::one() - state.beta1.powi(t);
    let c2 = T::one() - state.beta2.powi(t);
    let p = AdamParams {
        beta1: state.beta1,
        beta2: state.beta2,
        eps: state.eps,
        c1,
        c2,
        lr: learning_rate,
    };
    update(
        model.w1.as_mut_slice(),
        grads.w1.as_slice(),
        state.m1.as_mut_slice(),
        state.v1.as_mut_slice(),
        &p,
    );
    update(
        model.w2.as_mut_slice(),
        grads.w2.as_slice(),
        state.m2.as_mut_slice(),
        state.v2.as_mut_slice(),
        &p,
    );
}

struct AdamParams<T> {
    beta1: T,
    beta2: T,
    eps: T,
    c1: T,
    c2: T,
    lr: T,
}

/// Elementwise Adam on flat slices.
fn update<T: Scalar>(w: &mut [T], g: &[T], m: &mut [T], v: &mut [T], p: &AdamParams<T>) {
    let one = T::one();
    for (((w, &g), m), v) in w.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = p.beta1 * *m + (one - p.beta1) * g;
        *v = p.beta2 * *v + (one - p.beta2) * g * g;
        let m_hat = *m / p.c1;
        let v_hat = *v / p.c2;
        *w -= p.lr * m_hat / (v_hat.sqrt() + p.eps);
    }
}
