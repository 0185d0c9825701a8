//! Subcommand bodies. Each takes a resolved configuration and writes its
//! artifacts plus a run manifest into an output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clclsa_core::data::{apply_missingness, split, MissingnessSpec, MultiOmicsDataset, SplitSpec};
use clclsa_core::eval::{
    ablation_run, baseline_sweep, missing_rate_sweep, partial_omics_run, hyperparam_surface,
    AblationSpec, Experiment, MetricsReport, SurfaceSpec, TrialRecord, Variant,
};
use clclsa_core::model::ModelConfig;
use clclsa_core::train::{grid_search, train, TrainError, TrialExecutor};

use crate::checkpoint;
use crate::config::{trial_seeds, RunConfig};
use crate::error::{io, Error, Result};
use crate::io::{dataset_dir_files, load_dataset_dir, save_dataset_dir, write_json};
use crate::manifest::{manifest_path, RunManifest};
use crate::report::{emit_report, write_epoch_log, write_grid_summary, Format};

/// Why a command failed: bad invocation or a failure while running.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Self::Usage(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<clclsa_core::Error> for Failure {
    fn from(e: clclsa_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type Outcome<T = ()> = std::result::Result<T, Failure>;

/// State shared by all subcommands.
pub struct Context {
    pub command: String,
    pub args: Vec<String>,
    pub config: RunConfig,
    pub config_file: Option<PathBuf>,
    pub threads: usize,
}

impl Context {
    pub fn require_seed(&self) -> Outcome<u64> {
        self.config.seed.ok_or_else(|| {
            Failure::Usage(format!("`{}` is stochastic and needs --seed", self.command))
        })
    }

    fn manifest(&self) -> Result<(RunManifest, Instant)> {
        let mut m = RunManifest::new(&self.command, self.args.clone(), self.config.clone(), self.threads);
        if let Some(p) = &self.config_file {
            m.add_input(p)?;
        }
        Ok((m, Instant::now()))
    }
}

fn finish(mut m: RunManifest, start: Instant, out: &Path) -> Result<()> {
    m.duration_secs = start.elapsed().as_secs_f64();
    m.write(&manifest_path(out))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))
}

fn add_dataset_inputs(m: &mut RunManifest, dir: &Path) -> Result<()> {
    for f in dataset_dir_files(dir)? {
        m.add_input(&f)?;
    }
    Ok(())
}

fn load(m: &mut RunManifest, dir: &Path) -> Result<MultiOmicsDataset> {
    add_dataset_inputs(m, dir)?;
    load_dataset_dir(dir)
}

pub fn synth(ctx: &Context, out: &Path) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let ds = clclsa_core::data::synth_generate(&ctx.config.synth)?;
    save_dataset_dir(out, &ds, &[seed])?;
    m.seeds = vec![seed];
    for f in dataset_dir_files(out)? {
        m.add_artifact(&f);
    }
    finish(m, start, out)?;
    Ok(())
}

pub fn mask(ctx: &Context, data: &Path, out: &Path) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let ds = load(&mut m, data)?;
    let spec = MissingnessSpec {
        eta: ctx.config.mask.eta,
        seed,
        policy: ctx.config.mask.policy.clone(),
    };
    let masked = apply_missingness(&ds, &spec)?;
    save_dataset_dir(out, &masked, &[seed])?;
    m.seeds = vec![seed];
    for f in dataset_dir_files(out)? {
        m.add_artifact(&f);
    }
    finish(m, start, out)?;
    Ok(())
}

pub fn split_cmd(ctx: &Context, data: &Path, out: &Path) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let ds = load(&mut m, data)?;
    let spec = SplitSpec {
        train_fraction: ctx.config.experiment.train_fraction,
        seed,
        stratified: ctx.config.experiment.stratified,
    };
    let (tr, te) = split(&ds, &spec)?;
    for (name, part) in [("train", &tr), ("test", &te)] {
        let dir = out.join(name);
        save_dataset_dir(&dir, part, &[seed])?;
        for f in dataset_dir_files(&dir)? {
            m.add_artifact(&f);
        }
    }
    m.seeds = vec![seed];
    finish(m, start, out)?;
    Ok(())
}

fn model_config(cfg: &RunConfig, ds: &MultiOmicsDataset) -> Result<ModelConfig> {
    cfg.model_for(&ds.view_dims(), ds.num_classes())
}

/// Train output file names.
pub const EPOCH_LOG: &str = "epochs.csv";
pub const VAL_METRICS: &str = "val_metrics.json";
pub const METRICS: &str = "metrics.json";

pub fn train_cmd(
    ctx: &Context,
    data: &Path,
    val: Option<&Path>,
    out: &Path,
    binary: bool,
) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let ds = load(&mut m, data)?;
    let val_ds = val.map(|v| load(&mut m, v)).transpose()?;
    let mc = model_config(&ctx.config, &ds)?;
    create_dir(out)?;
    let mut resolved = ctx.config.clone();
    resolved.model = mc.clone();
    m.config = resolved;
    m.seeds = vec![seed];
    let log_path = out.join(EPOCH_LOG);
    match train(&ds, &mc, &ctx.config.train, val_ds.as_ref()) {
        Ok(outcome) => {
            let ckpt = out.join(if binary { "model.bin" } else { "model.json" });
            checkpoint::save(&ckpt, &outcome.model)?;
            write_epoch_log(&log_path, &outcome.logs)?;
            m.add_artifact(&ckpt);
            m.add_artifact(&log_path);
            if let Some(v) = &val_ds {
                let pred = outcome.model.predict(v.views(), v.mask())?;
                let report = MetricsReport::from_probs(&pred.probs, v.labels())?;
                let p = out.join(VAL_METRICS);
                write_json(&p, &report)?;
                m.add_artifact(&p);
            }
            finish(m, start, out)?;
            Ok(())
        }
        Err(TrainError::Invalid(e)) => Err(e.into()),
        Err(TrainError::Aborted(abort)) => {
            write_epoch_log(&log_path, &abort.logs)?;
            m.add_artifact(&log_path);
            finish(m, start, out)?;
            Err(Failure::Runtime(format!(
                "training aborted at epoch {}: non-finite {}",
                abort.epoch, abort.term
            )))
        }
    }
}

pub fn eval_cmd(ctx: &Context, model: &Path, data: &Path, out: &Path) -> Outcome<MetricsReport> {
    let (mut m, start) = ctx.manifest()?;
    m.add_input(model)?;
    let net = checkpoint::load(model)?;
    let ds = load(&mut m, data)?;
    let pred = net.predict(ds.views(), ds.mask())?;
    let report = MetricsReport::from_probs(&pred.probs, ds.labels())?;
    create_dir(out)?;
    let p = out.join(METRICS);
    write_json(&p, &report)?;
    m.add_artifact(&p);
    finish(m, start, out)?;
    Ok(report)
}

fn experiment_setup(
    ctx: &Context,
    m: &mut RunManifest,
    data: &Path,
) -> Result<(MultiOmicsDataset, ModelConfig, RunConfig)> {
    let ds = load(m, data)?;
    let mc = model_config(&ctx.config, &ds)?;
    let mut cfg = ctx.config.clone();
    cfg.model = mc.clone();
    if cfg.experiment.dataset == clclsa_core::eval::RunOptions::default().dataset {
        if let Some(name) = data.file_name() {
            cfg.experiment.dataset = name.to_string_lossy().into_owned();
        }
    }
    m.config = cfg.clone();
    Ok((ds, mc, cfg))
}

fn write_results(m: &mut RunManifest, out: &Path, trials: &[TrialRecord]) -> Result<()> {
    for (name, format) in [("results.csv", Format::Csv), ("results.json", Format::Json)] {
        let p = out.join(name);
        emit_report(trials, &p, format)?;
        m.add_artifact(&p);
    }
    Ok(())
}

fn fail_if_all_failed(trials: &[TrialRecord]) -> Outcome {
    if !trials.is_empty() && trials.iter().all(|t| !t.is_ok()) {
        return Err(Failure::Runtime(format!(
            "every trial failed; first: {}",
            trials[0].status
        )));
    }
    Ok(())
}

pub fn sweep_cmd(ctx: &Context, data: &Path, out: &Path, exec: &impl TrialExecutor) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let (ds, mc, cfg) = experiment_setup(ctx, &mut m, data)?;
    let seeds = trial_seeds(seed, cfg.sweep.trials);
    m.seeds = seeds.clone();
    create_dir(out)?;
    let exp = Experiment {
        ds: &ds,
        model: &mc,
        train: &cfg.train,
        options: &cfg.experiment,
    };
    let mut trials = Vec::new();
    if cfg.sweep.view_subsets.is_empty() {
        for &v in &cfg.sweep.variants {
            let r = match v {
                Variant::Full => missing_rate_sweep(&exp, &cfg.sweep.etas, &seeds, exec)?,
                other => baseline_sweep(&exp, other, &cfg.sweep.etas, &seeds, exec)?,
            };
            trials.extend(r.trials().cloned());
        }
    } else {
        let subsets = partial_omics_run(&exp, &cfg.sweep.view_subsets, &cfg.sweep.etas, &seeds, exec)?;
        for s in subsets {
            let tag: Vec<String> = s.views.iter().map(|v| v.to_string()).collect();
            trials.extend(s.sweep.trials().cloned().map(|mut t| {
                t.variant = format!("{}[{}]", t.variant, tag.join("+"));
                t
            }));
        }
    }
    write_results(&mut m, out, &trials)?;
    finish(m, start, out)?;
    fail_if_all_failed(&trials)
}

pub fn ablate_cmd(ctx: &Context, data: &Path, out: &Path, exec: &impl TrialExecutor) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let (ds, mc, cfg) = experiment_setup(ctx, &mut m, data)?;
    let spec = AblationSpec {
        variants: cfg.ablation.variants.clone(),
        etas: cfg.ablation.etas.clone(),
        seeds: trial_seeds(seed, cfg.ablation.trials),
    };
    m.seeds = spec.seeds.clone();
    create_dir(out)?;
    let exp = Experiment {
        ds: &ds,
        model: &mc,
        train: &cfg.train,
        options: &cfg.experiment,
    };
    let results = ablation_run(&exp, &spec, exec)?;
    let trials: Vec<TrialRecord> = results.iter().flat_map(|r| r.trials().cloned()).collect();
    write_results(&mut m, out, &trials)?;
    finish(m, start, out)?;
    fail_if_all_failed(&trials)
}

pub fn surface_cmd(ctx: &Context, data: &Path, out: &Path, exec: &impl TrialExecutor) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let (ds, mc, cfg) = experiment_setup(ctx, &mut m, data)?;
    let s = &cfg.surface;
    let spec = SurfaceSpec {
        fixed: s.fixed,
        fixed_value: s.fixed_value,
        first: s.first.clone(),
        second: s.second.clone(),
        eta: s.eta,
    };
    let seeds = trial_seeds(seed, s.trials);
    m.seeds = seeds.clone();
    create_dir(out)?;
    let exp = Experiment {
        ds: &ds,
        model: &mc,
        train: &cfg.train,
        options: &cfg.experiment,
    };
    let cells = hyperparam_surface(&exp, &spec, &seeds, exec)?;
    let trials: Vec<TrialRecord> = cells.iter().flat_map(|c| c.trials.iter().cloned()).collect();
    write_results(&mut m, out, &trials)?;
    let p = out.join("surface.json");
    write_json(&p, &cells)?;
    m.add_artifact(&p);
    finish(m, start, out)?;
    fail_if_all_failed(&trials)
}

pub fn grid_cmd(
    ctx: &Context,
    data: &Path,
    val: Option<&Path>,
    out: &Path,
    exec: &impl TrialExecutor,
) -> Outcome {
    let seed = ctx.require_seed()?;
    let (mut m, start) = ctx.manifest()?;
    let (ds, mc, cfg) = experiment_setup(ctx, &mut m, data)?;
    let val_ds = val.map(|v| load(&mut m, v)).transpose()?;
    m.seeds = vec![seed];
    create_dir(out)?;
    let result = grid_search(&ds, val_ds.as_ref(), &mc, &cfg.grid, &cfg.train, exec)?;
    let csv = out.join("grid.csv");
    write_grid_summary(&csv, &result)?;
    m.add_artifact(&csv);
    let json = out.join("grid.json");
    write_json(&json, &result)?;
    m.add_artifact(&json);
    if let Some(best) = &result.best {
        let mut best_cfg = cfg.clone();
        best_cfg.train = best.clone();
        let p = out.join("best_config.json");
        write_json(&p, &best_cfg)?;
        m.add_artifact(&p);
    }
    finish(m, start, out)?;
    if result.best.is_none() {
        return Err(Failure::Runtime("every grid trial failed".into()));
    }
    Ok(())
}
