//! Mini-batch training with early stopping on validation loss.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adamw::{AdamW, AdamWConfig};
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_backbone: f64,
    pub lr_end_to_end: f64,
    pub lr_head: f64,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            lr_backbone: 1e-3,
            lr_end_to_end: 1e-4,
            lr_head: 1e-3,
            early_stop_patience: 10,
            max_epochs: 500,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.lr_backbone, self.lr_end_to_end, self.lr_head];
        if rates.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.batch_size == 0 || self.early_stop_patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size, early_stop_patience and max_epochs must be >= 1".into()));
        }
        if self.weight_decay < 0.0 || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("invalid AdamW coefficients".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self, learning_rate: f64) -> AdamWConfig {
        AdamWConfig {
            learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopSignal {
    Improved,
    Wait,
    Stop,
}

/// Patience counter over strictly improving validation losses.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopSignal {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.waited = 0;
            StopSignal::Improved
        } else {
            self.waited += 1;
            if self.waited >= self.patience {
                StopSignal::Stop
            } else {
                StopSignal::Wait
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// A differentiable training target over an indexed training set.
pub trait Objective {
    type Params: ParamSet;

    fn train_len(&self) -> usize;

    /// Mean batch loss; gradients are accumulated into `grad` (zeroed by the caller).
    fn batch_loss(&mut self, params: &Self::Params, batch: &[usize], grad: &mut Self::Params) -> Result<f64>;

    /// Deterministic loss over the whole validation set.
    fn validation_loss(&mut self, params: &Self::Params) -> Result<f64>;
}

fn finite(v: f64, location: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            location: location.into(),
            detail: format!("value {v}"),
        })
    }
}

/// Runs AdamW with per-epoch seeded shuffling and restores the parameters of
/// the best validation epoch.
pub fn train<O: Objective>(
    params: O::Params,
    objective: &mut O,
    cfg: &TrainConfig,
    learning_rate: f64,
    seed: u64,
) -> Result<(O::Params, History)> {
    cfg.validate()?;
    let n = objective.train_len();
    if n == 0 {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let mut params = params;
    let mut opt = AdamW::new(cfg.optimizer(learning_rate), &params);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let mut best = params.clone();
    let mut history = History::default();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = params.zeros_like();

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(seed, &[epoch as u64]));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for g in grad.tensors_mut() {
                g.fill(0.0);
            }
            let loss = finite(objective.batch_loss(&params, batch, &mut grad)?, "batch loss")?;
            total += loss * batch.len() as f64;
            if !grad.all_finite() {
                return Err(Error::NonFinite {
                    location: "gradient".into(),
                    detail: format!("epoch {epoch}"),
                });
            }
            opt.step(&mut params, &grad);
        }
        let val = finite(objective.validation_loss(&params)?, "validation loss")?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / n as f64,
            val_loss: val,
        });
        match stopper.observe(epoch, val) {
            StopSignal::Improved => best.clone_from(&params),
            StopSignal::Wait => {}
            StopSignal::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch();
    Ok((best, history))
}
