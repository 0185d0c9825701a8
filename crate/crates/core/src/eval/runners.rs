use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::data::{
    apply_missingness_on, split, MissingnessPolicy, MissingnessSpec, MultiOmicsDataset, SplitSpec,
};
use crate::error::{Error, Result};
use crate::model::{CompletionMode, LossWeights, ModelConfig};
use crate::train::{train, TrainConfig, TrialExecutor};

/// How a trial's model differs from the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// All terms with the configured weights.
    Full,
    /// Missing latents are zero instead of cross-view predictions.
    ZeroFill,
    /// Trained only on subjects observing every view; missing test latents
    /// are zero.
    CompleteCase,
    /// Ablation: contrastive term kept, auxiliary term zeroed.
    Ctst,
    /// Ablation: auxiliary term kept, contrastive term zeroed.
    Aux,
    /// Ablation: both terms kept.
    CtstAux,
    /// Ablation: both terms zeroed.
    Plain,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "clclsa",
            Self::ZeroFill => "zero-fill",
            Self::CompleteCase => "complete-case",
            Self::Ctst => "ctst",
            Self::Aux => "aux",
            Self::CtstAux => "ctst+aux",
            Self::Plain => "plain",
        }
    }

    pub const ABLATIONS: [Variant; 4] = [Self::Ctst, Self::Aux, Self::CtstAux, Self::Plain];

    /// Weights actually used given the base weights. Ablation variants fix
    /// the cross-view weight at 0.1.
    pub fn weights(self, base: &LossWeights) -> LossWeights {
        let ablate = |al: bool, cl: bool| LossWeights {
            lambda_al: if al { base.lambda_al } else { 0.0 },
            lambda_co: 0.1,
            lambda_cl: if cl { base.lambda_cl } else { 0.0 },
            alpha: base.alpha,
        };
        match self {
            Self::Full | Self::ZeroFill | Self::CompleteCase => *base,
            Self::Ctst => ablate(false, true),
            Self::Aux => ablate(true, false),
            Self::CtstAux => ablate(true, true),
            Self::Plain => ablate(false, false),
        }
    }

    fn completion(self) -> Option<CompletionMode> {
        match self {
            Self::ZeroFill | Self::CompleteCase => Some(CompletionMode::ZeroFill),
            _ => None,
        }
    }
}

/// Settings shared by every trial of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub dataset: String,
    pub train_fraction: f64,
    pub stratified: bool,
    /// Keep the test set fully observed instead of masking it at the same
    /// rate as the training set.
    pub complete_test: bool,
    pub policy: MissingnessPolicy,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            dataset: "dataset".to_string(),
            train_fraction: 0.7,
            stratified: true,
            complete_test: false,
            policy: MissingnessPolicy::Uniform,
        }
    }
}

/// One train-and-evaluate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub dataset: String,
    pub variant: String,
    pub eta: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub report: Option<MetricsReport>,
    /// `ok`, or the failure reason.
    pub status: String,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.report.is_some()
    }
}

/// Per-metric values across trials; binary-only entries are `None` when
/// any contributing trial lacks them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub acc: f64,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub weighted_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: MetricValues,
    /// Sample standard deviation (zero for a single trial).
    pub std: MetricValues,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1.0)))
}

/// Mean and sample standard deviation over the successful trials, or
/// `None` if none succeeded.
pub fn aggregate(trials: &[TrialRecord]) -> Option<Aggregate> {
    let reports: Vec<&MetricsReport> = trials.iter().filter_map(|t| t.report.as_ref()).collect();
    if reports.is_empty() {
        return None;
    }
    let col = |f: &dyn Fn(&MetricsReport) -> f64| -> (f64, f64) {
        let v: Vec<f64> = reports.iter().map(|r| f(r)).collect();
        mean_std(&v)
    };
    let opt = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> (Option<f64>, Option<f64>) {
        let v: Option<Vec<f64>> = reports.iter().map(|r| f(r)).collect();
        match v {
            Some(v) => {
                let (m, s) = mean_std(&v);
                (Some(m), Some(s))
            }
            None => (None, None),
        }
    };
    let acc = col(&|r| r.acc);
    let f1 = opt(&|r| r.f1);
    let auc = opt(&|r| r.auc);
    let wf1 = col(&|r| r.weighted_f1);
    let mf1 = col(&|r| r.macro_f1);
    Some(Aggregate {
        count: reports.len(),
        mean: MetricValues {
            acc: acc.0,
            f1: f1.0,
            auc: auc.0,
            weighted_f1: wf1.0,
            macro_f1: mf1.0,
        },
        std: MetricValues {
            acc: acc.1,
            f1: f1.1,
            auc: auc.1,
            weighted_f1: wf1.1,
            macro_f1: mf1.1,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eta: f64,
    pub trials: Vec<TrialRecord>,
    pub summary: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variant: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn trials(&self) -> impl Iterator<Item = &TrialRecord> {
        self.points.iter().flat_map(|p| p.trials.iter())
    }

    pub fn mean_acc(&self) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| p.summary.as_ref().map(|s| s.mean.acc))
            .collect()
    }
}

/// Fully specified single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec<'a> {
    pub ds: &'a MultiOmicsDataset,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub options: &'a RunOptions,
    pub variant: Variant,
    pub eta: f64,
    pub seed: u64,
}

/// Splits with `seed`, masks the training side (and, unless
/// `complete_test`, the test side from an independent stream) at `eta`,
/// trains with `seed` and evaluates on the test side.
pub fn run_trial(spec: &TrialSpec<'_>) -> TrialRecord {
    let weights = spec.variant.weights(&spec.train.weights);
    let (report, status) = match trial_report(spec, &weights) {
        Ok(r) => (Some(r), "ok".to_string()),
        Err(e) => (None, e.to_string()),
    };
    TrialRecord {
        dataset: spec.options.dataset.clone(),
        variant: spec.variant.name().to_string(),
        eta: spec.eta,
        seed: spec.seed,
        weights,
        report,
        status,
    }
}

fn trial_report(spec: &TrialSpec<'_>, weights: &LossWeights) -> Result<MetricsReport> {
    let opts = spec.options;
    let (train_ds, test_ds) = split(
        spec.ds,
        &SplitSpec {
            train_fraction: opts.train_fraction,
            seed: spec.seed,
            stratified: opts.stratified,
        },
    )?;
    let mask = MissingnessSpec {
        eta: spec.eta,
        seed: spec.seed,
        policy: opts.policy.clone(),
    };
    let mut train_ds = apply_missingness_on(&train_ds, &mask, "missingness/train")?;
    let test_ds = if opts.complete_test {
        test_ds
    } else {
        apply_missingness_on(&test_ds, &mask, "missingness/test")?
    };
    if spec.variant == Variant::CompleteCase {
        train_ds = train_ds.complete_cases();
    }
    let mut model = spec.model.clone();
    if let Some(mode) = spec.variant.completion() {
        model.completion = mode;
    }
    let cfg = TrainConfig {
        seed: spec.seed,
        weights: *weights,
        ..spec.train.clone()
    };
    let out = train(&train_ds, &model, &cfg, None).map_err(|e| e.into_error())?;
    let pred = out.model.predict(test_ds.views(), test_ds.mask())?;
    MetricsReport::from_probs(&pred.probs, test_ds.labels())
}

fn check_grid(etas: &[f64], seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    if etas.is_empty() || etas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig(
            "missing rates must be nonempty and strictly increasing".into(),
        ));
    }
    if let Some(&eta) = etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidHyperparameter { name: "eta", value: eta });
    }
    Ok(())
}

/// Arguments common to the sweep-style runners.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub ds: &'a MultiOmicsDataset,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub options: &'a RunOptions,
}

fn sweep_variant(
    exp: &Experiment<'_>,
    variant: Variant,
    etas: &[f64],
    seeds: &[u64],
    executor: &impl TrialExecutor,
) -> Result<SweepResult> {
    check_grid(etas, seeds)?;
    exp.model.validate()?;
    let cells: Vec<(f64, u64)> = etas
        .iter()
        .flat_map(|&e| seeds.iter().map(move |&s| (e, s)))
        .collect();
    let records = executor.run(cells.len(), |i| {
        let (eta, seed) = cells[i];
        run_trial(&TrialSpec {
            ds: exp.ds,
            model: exp.model,
            train: exp.train,
            options: exp.options,
            variant,
            eta,
            seed,
        })
    });
    let points = etas
        .iter()
        .zip(records.chunks(seeds.len()))
        .map(|(&eta, trials)| SweepPoint {
            eta,
            summary: aggregate(trials),
            trials: trials.to_vec(),
        })
        .collect();
    Ok(SweepResult {
        variant: variant.name().to_string(),
        points,
    })
}

/// Trains and evaluates at every missing rate for every seed.
pub fn missing_rate_sweep(
    exp: &Experiment<'_>,
    etas: &[f64],
    seeds: &[u64],
    executor: &impl TrialExecutor,
) -> Result<SweepResult> {
    sweep_variant(exp, Variant::Full, etas, seeds, executor)
}

/// [`missing_rate_sweep`] for a reference variant (zero-fill or
/// complete-case).
pub fn baseline_sweep(
    exp: &Experiment<'_>,
    variant: Variant,
    etas: &[f64],
    seeds: &[u64],
    executor: &impl TrialExecutor,
) -> Result<SweepResult> {
    sweep_variant(exp, variant, etas, seeds, executor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub views: Vec<usize>,
    pub sweep: SweepResult,
}

/// Restricts data and architecture to each listed view subset and sweeps.
pub fn partial_omics_run(
    exp: &Experiment<'_>,
    subsets: &[Vec<usize>],
    etas: &[f64],
    seeds: &[u64],
    executor: &impl TrialExecutor,
) -> Result<Vec<SubsetResult>> {
    let mut out = Vec::with_capacity(subsets.len());
    for views in subsets {
        if views.len() < 2 {
            return Err(Error::InvalidSubset(alloc::format!(
                "view subset {views:?} has fewer than 2 views"
            )));
        }
        let ds = exp.ds.select_views(views)?;
        let model = exp.model.restrict_views(views)?;
        let sub = Experiment {
            ds: &ds,
            model: &model,
            ..*exp
        };
        out.push(SubsetResult {
            views: views.clone(),
            sweep: missing_rate_sweep(&sub, etas, seeds, executor)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightName {
    LambdaAl,
    LambdaCo,
    LambdaCl,
}

/// One fixed weight and candidate values for the other two (in
/// `al, co, cl` order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub fixed: WeightName,
    pub fixed_value: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub weights: LossWeights,
    pub trials: Vec<TrialRecord>,
    pub summary: Option<Aggregate>,
}

impl SurfaceSpec {
    pub fn cells(&self, alpha: f64) -> Vec<LossWeights> {
        let mut out = Vec::new();
        for &a in &self.first {
            for &b in &self.second {
                let (al, co, cl) = match self.fixed {
                    WeightName::LambdaAl => (self.fixed_value, a, b),
                    WeightName::LambdaCo => (a, self.fixed_value, b),
                    WeightName::LambdaCl => (a, b, self.fixed_value),
                };
                out.push(LossWeights {
                    lambda_al: al,
                    lambda_co: co,
                    lambda_cl: cl,
                    alpha,
                });
            }
        }
        out
    }
}

/// Trains every weight cell at a fixed missing rate; all cells share the
/// same seeds.
pub fn hyperparam_surface(
    exp: &Experiment<'_>,
    spec: &SurfaceSpec,
    seeds: &[u64],
    executor: &impl TrialExecutor,
) -> Result<Vec<SurfaceCell>> {
    check_grid(&[spec.eta], seeds)?;
    if spec.first.is_empty() || spec.second.is_empty() {
        return Err(Error::InvalidConfig("surface axes must be nonempty".into()));
    }
    let cells = spec.cells(exp.train.weights.alpha);
    for w in &cells {
        w.validate()?;
    }
    let configs: Vec<TrainConfig> = cells
        .iter()
        .map(|&weights| TrainConfig {
            weights,
            ..exp.train.clone()
        })
        .collect();
    let n = seeds.len();
    let records = executor.run(cells.len() * n, |i| {
        run_trial(&TrialSpec {
            ds: exp.ds,
            model: exp.model,
            train: &configs[i / n],
            options: exp.options,
            variant: Variant::Full,
            eta: spec.eta,
            seed: seeds[i % n],
        })
    });
    Ok(cells
        .into_iter()
        .zip(records.chunks(n))
        .map(|(weights, trials)| SurfaceCell {
            weights,
            summary: aggregate(trials),
            trials: trials.to_vec(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub variants: Vec<Variant>,
    pub etas: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Sweeps each ablation variant over the missing rates.
pub fn ablation_run(
    exp: &Experiment<'_>,
    spec: &AblationSpec,
    executor: &impl TrialExecutor,
) -> Result<Vec<SweepResult>> {
    spec.variants
        .iter()
        .map(|&v| sweep_variant(exp, v, &spec.etas, &spec.seeds, executor))
        .collect()
}
