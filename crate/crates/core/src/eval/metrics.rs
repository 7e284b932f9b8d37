use crate::error::{Error, Result};

fn check(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("no predictions to score".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1 over all `n_classes` classes. A class with
/// no true and no predicted members scores 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<f64> {
    check(pred, truth)?;
    if n_classes == 0 {
        return Err(Error::InvalidParameter("need at least one class".into()));
    }
    if let Some(&bad) = pred.iter().chain(truth).find(|&&x| x >= n_classes) {
        return Err(Error::InvalidParameter(format!("class {bad} outside 0..{n_classes}")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..n_classes)
        .map(|k| {
            let denom = 2 * tp[k] + fp[k] + fn_[k];
            if denom == 0 {
                0.0
            } else {
                (2 * tp[k]) as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}

/// Mean and sample standard deviation (n − 1); the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
