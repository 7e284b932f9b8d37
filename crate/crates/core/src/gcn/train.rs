use std::borrow::Cow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::adjacency::NormAdjacency;
use super::model::{backward, data_loss, forward_propagated, init_model, GcnModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub hidden_dim: usize,
    pub self_loops: bool,
    /// Propagate over the graph again before the linear head.
    pub head_propagation: bool,
    /// Inverted dropout on the hidden layer during training.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            patience: 10,
            max_epochs: 200,
            hidden_dim: 16,
            self_loops: true,
            head_propagation: true,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be at least 1");
        }
        if self.hidden_dim < 1 {
            return bad("hidden_dim must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Data term on the training nodes.
    pub train_loss: f64,
    /// Data term on the validation nodes.
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult<T> {
    /// Weights from the epoch with the lowest validation loss.
    pub model: GcnModel<T>,
    pub history: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl<T> TrainResult<T> {
    /// Training-set loss of the returned model.
    pub fn best_train_loss(&self) -> f64 {
        self.history[self.best_epoch - 1].train_loss
    }
}

fn check_masks(n: usize, c: usize, labels: &[usize], train: &[usize], val: &[usize]) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Mask("train and validation masks must be non-empty".into()));
    }
    let mut seen = vec![0u8; n];
    for (tag, mask) in [(1u8, train), (2u8, val)] {
        for &i in mask {
            if i >= n {
                return Err(Error::Mask(format!("node {i} out of range for {n} nodes")));
            }
            if seen[i] != 0 {
                return Err(Error::Mask(format!(
                    "node {i} listed twice or in both train and validation"
                )));
            }
            seen[i] = tag;
        }
    }
    let mut present = vec![false; c];
    train.iter().for_each(|&i| present[labels[i]] = true);
    if let Some(k) = present.iter().position(|p| !p) {
        return Err(Error::Mask(format!("class {k} has no training node")));
    }
    Ok(())
}

/// Full-batch training with validation-loss early stopping.
///
/// Each epoch first evaluates the current weights on both masks, then takes
/// one Adam step. Training halts once `patience` consecutive epochs fail to
/// improve on the best validation loss, or after `max_epochs`. Only labels of
/// nodes in `train_mask` and `val_mask` are read.
pub fn train<T: Scalar>(
    ds: &Dataset<T>,
    adj: &NormAdjacency<T>,
    train_mask: &[usize],
    val_mask: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainResult<T>> {
    cfg.validate()?;
    let labels = ds.labels();
    check_masks(ds.n(), ds.c(), labels, train_mask, val_mask)?;
    let ax = adj.spmm(ds.features())?;

    let mut model: GcnModel<T> = init_model(ds.d(), cfg.hidden_dim, ds.c(), cfg.seed);
    model.head_propagation = cfg.head_propagation;
    let mut opt = AdamState::new(&model);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let lr = T::lit(cfg.learning_rate);
    let wd = T::lit(cfg.weight_decay);

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, GcnModel<T>)> = None;
    let mut since_best = 0;
    let mut stopped_epoch = cfg.max_epochs;

    for epoch in 1..=cfg.max_epochs {
        let eval = forward_propagated(&model, adj, Cow::Borrowed(&ax), None)?;
        let train_loss = data_loss(&eval.logits, labels, train_mask)?.as_f64();
        let val_loss = data_loss(&eval.logits, labels, val_mask)?.as_f64();
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });

        if best.as_ref().is_none_or(|(_, b, _)| val_loss < *b) {
            best = Some((epoch, val_loss, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_epoch = epoch;
                break;
            }
        }
        if epoch == cfg.max_epochs {
            break;
        }

        let grads = if cfg.dropout > 0.0 {
            let cache = forward_propagated(&model, adj, Cow::Borrowed(&ax), Some((cfg.dropout, &mut dropout_rng)))?;
            backward(&cache, labels, train_mask, &model, wd)?
        } else {
            backward(&eval, labels, train_mask, &model, wd)?
        };
        adam_step(&mut opt, &mut model, &grads, lr);
    }

    let (best_epoch, best_val_loss, model) = best.expect("at least one epoch runs");
    Ok(TrainResult {
        model,
        history,
        stopped_epoch,
        best_epoch,
        best_val_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::adjacency::normalize_adjacency;
    use crate::latent_graph::{similarity_matrix, threshold_graph};

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                patience: 0,
                ..Default::default()
            },
            TrainConfig {
                max_epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                hidden_dim: 0,
                ..Default::default()
            },
            TrainConfig {
                dropout: 1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn mask_violations() {
        let ds = crate::data::synth_blobs::<f64>(12, 4, 2, 6.0, 1).unwrap();
        let sm = similarity_matrix(&ds);
        let adj = normalize_adjacency(&threshold_graph(&sm, 0.5).unwrap(), true);
        let cfg = TrainConfig::default();
        assert!(train(&ds, &adj, &[], &[1], &cfg).is_err());
        assert!(train(&ds, &adj, &[0, 1, 2], &[2], &cfg).is_err());
        assert!(train(&ds, &adj, &[0, 2, 4], &[1], &cfg).is_err(), "class 1 absent");
        assert!(train(&ds, &adj, &[0, 1, 40], &[3], &cfg).is_err());
    }
}
