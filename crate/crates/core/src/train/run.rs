use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{lr_at, BatchMode, TrainConfig};
use crate::data::MultiOmicsDataset;
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::model::{LossBreakdown, Model, ModelConfig, ObjectiveConfig};
use crate::numerics::{adam_step, backward, AdamConfig, AdamState, Mode, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub breakdown: LossBreakdown,
    pub lr: f64,
    /// Accuracy of the training-mode forward pass (dropout active).
    pub train_acc: f64,
    pub val: Option<MetricsReport>,
    /// Mean per-coordinate variance of observed latents, per view.
    pub latent_variance: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub logs: Vec<EpochLog>,
    pub optimizer_steps: u64,
}

/// Training stopped on a non-finite loss or gradient.
#[derive(Debug, Clone)]
pub struct TrainAbort {
    pub epoch: usize,
    /// The first non-finite quantity (`l_clf`, `l_al`, `l_co`, `l_cl` or
    /// `gradient`).
    pub term: String,
    /// Parameters from the last epoch whose loss was finite.
    pub model: Model,
    pub logs: Vec<EpochLog>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("non-finite {} at epoch {}", .0.term, .0.epoch)]
    Aborted(Box<TrainAbort>),
}

impl TrainError {
    pub fn into_error(self) -> Error {
        match self {
            Self::Invalid(e) => e,
            Self::Aborted(a) => Error::NonFinite { term: a.term },
        }
    }
}

/// Builds the network from `model_config` and trains it on `ds`.
pub fn train(
    ds: &MultiOmicsDataset,
    model_config: &ModelConfig,
    cfg: &TrainConfig,
    val: Option<&MultiOmicsDataset>,
) -> Result<TrainOutcome, TrainError> {
    let model = Model::new(model_config.clone(), cfg.seed)?;
    train_model(model, ds, cfg, val)
}

/// Trains an existing network. On complete data the cross-view weight is
/// forced to zero.
pub fn train_model(
    mut model: Model,
    ds: &MultiOmicsDataset,
    cfg: &TrainConfig,
    val: Option<&MultiOmicsDataset>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_compatible(model.config(), ds)?;
    if let Some(v) = val {
        check_compatible(model.config(), v)?;
    }
    if ds.num_subjects() == 0 {
        return Err(Error::EmptyBatch.into());
    }
    let mut weights = cfg.weights;
    if ds.mask().is_complete() {
        weights = weights.for_complete_data();
    }
    let objective = ObjectiveConfig {
        weights,
        toggles: cfg.toggles,
        reduction: cfg.reduction,
    };

    let mut adam = AdamState::new(model.params(), AdamConfig::default());
    let mut dropout = RngStream::new(cfg.seed, "dropout");
    let mut batch_rng = RngStream::new(cfg.seed, "batch");
    let n = ds.num_subjects();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut last_good = model.clone();
    let all: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let batches: Vec<Vec<usize>> = match cfg.batch {
            BatchMode::Full => alloc::vec![all.clone()],
            BatchMode::MiniBatch { size } => {
                let mut order = all.clone();
                batch_rng.shuffle(&mut order);
                order.chunks(size).map(<[usize]>::to_vec).collect()
            }
        };
        let mut breakdown = LossBreakdown::default();
        let mut hits = 0usize;
        let mut variance = Vec::new();
        let snapshot = model.clone();
        for batch in &batches {
            let owned;
            let part = if batches.len() == 1 {
                ds
            } else {
                owned = ds.subset(batch);
                &owned
            };
            let abort = |term: String, model: Model, logs: Vec<EpochLog>| {
                TrainError::Aborted(Box::new(TrainAbort {
                    epoch,
                    term,
                    model,
                    logs,
                }))
            };
            let obj = match model.objective(
                part.views(),
                part.mask(),
                part.labels(),
                &objective,
                Mode::Train,
                &mut dropout,
            ) {
                Ok(o) => o,
                Err(Error::NonFinite { term }) => return Err(abort(term, last_good, logs)),
                Err(e) => return Err(e.into()),
            };
            let grads = backward(&obj.graph, obj.total, model.params())?;
            if !grads.is_finite() {
                return Err(abort("gradient".to_string(), last_good, logs));
            }
            adam_step(model.params_mut(), &grads, &mut adam, lr)?;
            if model.params().iter().any(|(_, _, t)| !t.is_finite()) {
                return Err(abort("parameters".to_string(), last_good, logs));
            }

            let share = batch.len() as f64 / n as f64;
            let b = obj.breakdown;
            breakdown.l_clf += share * b.l_clf;
            breakdown.l_al += share * b.l_al;
            breakdown.l_co += share * b.l_co;
            breakdown.l_cl += share * b.l_cl;
            breakdown.total += share * b.total;
            let pred = obj.cache.yhat.argmax_rows();
            hits += pred.iter().zip(part.labels()).filter(|(p, y)| p == y).count();
            variance = obj.cache.latent_variance();
        }
        last_good = snapshot;

        let last = epoch + 1 == cfg.epochs;
        let val_report = match val {
            Some(v) if cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || last) => {
                let p = model.predict(v.views(), v.mask())?;
                Some(MetricsReport::from_probs(&p.probs, v.labels())?)
            }
            _ => None,
        };
        logs.push(EpochLog {
            epoch,
            breakdown,
            lr,
            train_acc: hits as f64 / n as f64,
            val: val_report,
            latent_variance: variance,
        });
    }
    Ok(TrainOutcome {
        model,
        logs,
        optimizer_steps: adam.t,
    })
}

fn check_compatible(config: &ModelConfig, ds: &MultiOmicsDataset) -> Result<()> {
    if config.input_dims != ds.view_dims() {
        return Err(Error::InvalidConfig(alloc::format!(
            "model expects view dims {:?}, dataset has {:?}",
            config.input_dims,
            ds.view_dims()
        )));
    }
    if config.num_classes != ds.num_classes() {
        return Err(Error::InvalidConfig(alloc::format!(
            "model has {} classes, dataset has {}",
            config.num_classes,
            ds.num_classes()
        )));
    }
    Ok(())
}
