use serde::{Deserialize, Serialize};

use super::special::student_t_cdf;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_ROPE: f64 = 0.01;

/// Posterior masses of the mean score difference, from the perspective of the
/// first method: `p_right` means it is better, `p_left` worse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesResult<T> {
    pub p_left: T,
    pub p_rope: T,
    pub p_right: T,
    pub rope_half_width: T,
}

/// Bayesian correlated t-test on per-fold differences.
///
/// The posterior of the mean difference is Student-t with `n−1` degrees of
/// freedom, centered at the sample mean, with scale² `(1/n + ρ/(1−ρ))·s²`.
/// With zero sample variance the posterior is a point mass at the mean.
pub fn bayesian_correlated_ttest<T: Scalar>(diffs: &[T], rho: T, rope: T) -> Result<BayesResult<T>> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 differences, got {n}")));
    }
    if !(rho >= T::zero() && rho < T::one()) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(rope >= T::zero()) || !rope.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rope must be finite and ≥ 0, got {rope}"
        )));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("non-finite difference".into()));
    }

    let nf = T::from_usize_lossy(n);
    let mean = diffs.iter().copied().sum::<T>() / nf;
    let var = diffs.iter().map(|&d| (d - mean) * (d - mean)).sum::<T>() / (nf - T::one());

    let (zero, one) = (T::zero(), T::one());
    let point = |l: bool, r: bool| BayesResult {
        p_left: if l { one } else { zero },
        p_rope: if !l && !r { one } else { zero },
        p_right: if r { one } else { zero },
        rope_half_width: rope,
    };
    if var == zero {
        return Ok(point(mean < -rope, mean > rope));
    }

    let scale = ((one / nf + rho / (one - rho)) * var).sqrt();
    let df = nf - one;
    let p_left = student_t_cdf((-rope - mean) / scale, df);
    let p_right = student_t_cdf((mean - rope) / scale, df);
    let p_rope = (one - (p_left + p_right)).max(zero);
    Ok(BayesResult {
        p_left,
        p_rope,
        p_right,
        rope_half_width: rope,
    })
}
