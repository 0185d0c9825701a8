use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{train, TrainConfig, TrialExecutor};
use crate::data::{split, MultiOmicsDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{Metric, MetricsReport};
use crate::model::{LossWeights, ModelConfig, WEIGHT_GRID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub lambda_al: Vec<f64>,
    pub lambda_co: Vec<f64>,
    pub lambda_cl: Vec<f64>,
    pub metric: Metric,
    /// Train fraction of the internal split used when no validation set
    /// is given.
    pub validation_fraction: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda_al: WEIGHT_GRID.to_vec(),
            lambda_co: WEIGHT_GRID.to_vec(),
            lambda_cl: WEIGHT_GRID.to_vec(),
            metric: Metric::Acc,
            validation_fraction: 0.8,
        }
    }
}

impl GridSpec {
    /// Weight triples in `(al, co, cl)` lexicographic order of the candidate
    /// lists. On complete data only `lambda_co = 0` is tried.
    pub fn triples(&self, base: &LossWeights, complete: bool) -> Result<Vec<LossWeights>> {
        if self.lambda_al.is_empty() || self.lambda_co.is_empty() || self.lambda_cl.is_empty() {
            return Err(Error::InvalidConfig("grid candidate sets must be nonempty".into()));
        }
        let co: Vec<f64> = if complete {
            alloc::vec![0.0]
        } else {
            self.lambda_co.clone()
        };
        let mut out = Vec::new();
        for &al in &self.lambda_al {
            for &c in &co {
                for &cl in &self.lambda_cl {
                    let w = LossWeights {
                        lambda_al: al,
                        lambda_co: c,
                        lambda_cl: cl,
                        alpha: base.alpha,
                    };
                    w.validate()?;
                    out.push(w);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TrialStatus {
    Ok { metric: f64, report: MetricsReport },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTrial {
    pub index: usize,
    pub weights: LossWeights,
    pub status: TrialStatus,
}

impl GridTrial {
    pub fn metric(&self) -> Option<f64> {
        match &self.status {
            TrialStatus::Ok { metric, .. } => Some(*metric),
            TrialStatus::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Successful trials best first, then failed trials in grid order.
    pub ranked: Vec<GridTrial>,
    pub best: Option<TrainConfig>,
}

/// Ranking: metric descending, then smaller `lambda_cl`, `lambda_co`,
/// `lambda_al`, then grid order.
fn rank(a: &GridTrial, b: &GridTrial) -> core::cmp::Ordering {
    match (a.metric(), b.metric()) {
        (Some(x), Some(y)) => y
            .total_cmp(&x)
            .then(a.weights.lambda_cl.total_cmp(&b.weights.lambda_cl))
            .then(a.weights.lambda_co.total_cmp(&b.weights.lambda_co))
            .then(a.weights.lambda_al.total_cmp(&b.weights.lambda_al))
            .then(a.index.cmp(&b.index)),
        (Some(_), None) => core::cmp::Ordering::Less,
        (None, Some(_)) => core::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    }
}

/// Trains one model per weight triple and ranks them on the validation
/// set. Every trial uses `base.seed`, so trials differ only in weights.
/// Without `val`, a stratified split of `train_ds` (seeded by `base.seed`)
/// provides one.
pub fn grid_search(
    train_ds: &MultiOmicsDataset,
    val_ds: Option<&MultiOmicsDataset>,
    model_config: &ModelConfig,
    grid: &GridSpec,
    base: &TrainConfig,
    executor: &impl TrialExecutor,
) -> Result<GridResult> {
    let (fit, val) = match val_ds {
        Some(v) => (train_ds.clone(), v.clone()),
        None => split(
            train_ds,
            &SplitSpec {
                train_fraction: grid.validation_fraction,
                seed: base.seed,
                stratified: true,
            },
        )?,
    };
    let triples = grid.triples(&base.weights, fit.mask().is_complete())?;
    let trials = executor.run(triples.len(), |index| {
        let weights = triples[index];
        let cfg = TrainConfig {
            weights,
            ..base.clone()
        };
        let status = match evaluate_trial(&fit, &val, model_config, &cfg, grid.metric) {
            Ok((metric, report)) => TrialStatus::Ok { metric, report },
            Err(reason) => TrialStatus::Failed { reason },
        };
        GridTrial {
            index,
            weights,
            status,
        }
    });
    let mut ranked = trials;
    ranked.sort_by(rank);
    let best = ranked.first().filter(|t| t.metric().is_some()).map(|t| TrainConfig {
        weights: t.weights,
        ..base.clone()
    });
    Ok(GridResult { ranked, best })
}

fn evaluate_trial(
    fit: &MultiOmicsDataset,
    val: &MultiOmicsDataset,
    model_config: &ModelConfig,
    cfg: &TrainConfig,
    metric: Metric,
) -> Result<(f64, MetricsReport), String> {
    let out = train(fit, model_config, cfg, None).map_err(|e| e.to_string())?;
    let pred = out
        .model
        .predict(val.views(), val.mask())
        .map_err(|e| e.to_string())?;
    let report = MetricsReport::from_probs(&pred.probs, val.labels()).map_err(|e| e.to_string())?;
    let value = report
        .metric(metric)
        .ok_or_else(|| "metric undefined on validation set".to_string())?;
    Ok((value, report))
}
