use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossToggles, LossWeights, Reduction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LrSchedule {
    /// `lr * factor^floor(epoch / every)`.
    Step { every: usize, factor: f64 },
    Constant,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self::Step {
            every: 500,
            factor: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BatchMode {
    /// One optimizer step per epoch over every training subject.
    #[default]
    Full,
    /// Shuffled batches of at most `size` subjects, one step per batch.
    MiniBatch { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub batch: BatchMode,
    pub seed: u64,
    pub weights: LossWeights,
    pub reduction: Reduction,
    /// Validation metrics every this many epochs (and after the last);
    /// 0 disables them.
    pub eval_every: usize,
    pub toggles: LossToggles,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2500,
            lr: 1e-4,
            schedule: LrSchedule::default(),
            batch: BatchMode::Full,
            seed: 0,
            weights: LossWeights::default(),
            reduction: Reduction::Mean,
            eval_every: 0,
            toggles: LossToggles::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidHyperparameter {
                name: "lr",
                value: self.lr,
            });
        }
        if let LrSchedule::Step { every, factor } = self.schedule {
            if every == 0 {
                return Err(Error::InvalidConfig("step schedule needs every >= 1".into()));
            }
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(Error::InvalidHyperparameter {
                    name: "factor",
                    value: factor,
                });
            }
        }
        if self.batch == (BatchMode::MiniBatch { size: 0 }) {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        self.weights.validate()
    }
}

/// Learning rate in effect during `epoch` (counted from 0).
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    match cfg.schedule {
        LrSchedule::Constant => cfg.lr,
        LrSchedule::Step { every, factor } => {
            cfg.lr * libm::pow(factor, (epoch / every.max(1)) as f64)
        }
    }
}
