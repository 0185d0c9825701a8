use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use clclsa::commands::{self, Context, Failure, Outcome};
use clclsa::config::{parse_override, Layers};
use clclsa::parallel::Pool;

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set train.epochs=200`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for every random stream; required by stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for multi-trial commands.
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,
    /// Architecture preset: rosmap, lgg, brca or kipan.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        views: Option<usize>,
        /// Features per view.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        class_sep: Option<f64>,
    },
    /// Mask whole views of a fraction of subjects.
    Mask {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Split a dataset into train and test directories.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Train a model and write a checkpoint and epoch log.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Write the checkpoint in the binary format.
        #[arg(long)]
        binary: bool,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy across missing rates.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Grid search over the loss weights.
    Grid {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Loss-term ablation across missing rates.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Accuracy over a two-weight grid with the third weight fixed.
    Surface {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Parser)]
#[command(
    name = "clclsa",
    version,
    about = "Multi-view classification with cross-view latent completion"
)]
struct Top {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Synth { .. } => "synth",
            Self::Mask { .. } => "mask",
            Self::Split { .. } => "split",
            Self::Train { .. } => "train",
            Self::Eval { .. } => "eval",
            Self::Sweep { .. } => "sweep",
            Self::Grid { .. } => "grid",
            Self::Ablate { .. } => "ablate",
            Self::Surface { .. } => "surface",
        }
    }

    /// Named flags as config overrides; applied after `--set`.
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        let mut put = |path: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{path}={v}"));
            }
        };
        let num = |v: &Option<f64>| v.map(|x| format!("{x:?}"));
        let list = |v: &Option<Vec<f64>>| v.as_ref().map(|x| format!("{x:?}"));
        match self {
            Self::Synth {
                n,
                classes,
                snr,
                class_sep,
                ..
            } => {
                put("synth.subjects", n.map(|x| x.to_string()));
                put("synth.num_classes", classes.map(|x| x.to_string()));
                put("synth.snr", num(snr));
                put("synth.class_sep", num(class_sep));
            }
            Self::Mask { eta, .. } => put("mask.eta", num(eta)),
            Self::Split { train_fraction, .. } => put("experiment.train_fraction", num(train_fraction)),
            Self::Train { epochs, lr, .. } => {
                put("train.epochs", epochs.map(|x| x.to_string()));
                put("train.lr", num(lr));
            }
            Self::Sweep { etas, trials, .. } => {
                put("sweep.etas", list(etas));
                put("sweep.trials", trials.map(|x| x.to_string()));
            }
            Self::Ablate { etas, trials, .. } => {
                put("ablation.etas", list(etas));
                put("ablation.trials", trials.map(|x| x.to_string()));
            }
            Self::Eval { .. } | Self::Grid { .. } | Self::Surface { .. } => {}
        }
        o
    }
}

fn context(top: &Top, args: Vec<String>) -> Outcome<Context> {
    let c = &top.common;
    let file = c.config.as_deref().map(Layers::read_file).transpose()?;
    let overrides = c
        .overrides
        .iter()
        .chain(&top.command.overrides())
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let layers = Layers {
        file,
        overrides,
        preset: c.preset.clone(),
        seed: c.seed,
    };
    let mut config = layers.resolve()?;
    if let Command::Synth { views, dim, .. } = &top.command {
        if views.is_some() || dim.is_some() {
            let current = &config.synth.view_dims;
            let dim = dim.or(current.first().copied()).unwrap_or(20);
            config.synth.view_dims = vec![dim; views.unwrap_or(current.len())];
        }
    }
    Ok(Context {
        command: top.command.name().to_string(),
        args,
        config,
        config_file: c.config.clone(),
        threads: c.threads,
    })
}

fn run(top: Top, args: Vec<String>) -> Outcome {
    let ctx = context(&top, args)?;
    if ctx.threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let pool = Pool::new(ctx.threads).map_err(|e| Failure::Runtime(e.to_string()))?;
    match &top.command {
        Command::Synth { out, .. } => commands::synth(&ctx, out),
        Command::Mask { data, out, .. } => commands::mask(&ctx, data, out),
        Command::Split { data, out, .. } => commands::split_cmd(&ctx, data, out),
        Command::Train {
            data,
            val,
            out,
            binary,
            ..
        } => commands::train_cmd(&ctx, data, val.as_deref(), out, *binary),
        Command::Eval { model, data, out } => {
            let report = commands::eval_cmd(&ctx, model, data, out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Sweep { data, out, .. } => commands::sweep_cmd(&ctx, data, out, &pool),
        Command::Grid { data, val, out } => commands::grid_cmd(&ctx, data, val.as_deref(), out, &pool),
        Command::Ablate { data, out, .. } => commands::ablate_cmd(&ctx, data, out, &pool),
        Command::Surface { data, out } => commands::surface_cmd(&ctx, data, out, &pool),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let top = match Top::try_parse_from(&args) {
        Ok(t) => t,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(top, args[1..].to_vec()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            if let Failure::Usage(_) = f {
                eprintln!("run `clclsa --help` for usage");
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
