//! Classification metrics and the experiment runners.

mod metrics;
mod runners;

pub use metrics::{
    accuracy, auc_binary, confusion_matrix, f1_binary, multiclass_f1, F1Average, Metric,
    MetricsReport,
};
pub use runners::{
    ablation_run, aggregate, baseline_sweep, hyperparam_surface, missing_rate_sweep,
    partial_omics_run, run_trial, AblationSpec, Aggregate, Experiment, MetricValues, RunOptions,
    SubsetResult, SurfaceCell, SurfaceSpec, SweepPoint, SweepResult, TrialRecord, TrialSpec,
    Variant, WeightName,
};
