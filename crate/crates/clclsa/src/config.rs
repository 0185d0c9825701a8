//! Run configuration: one JSON document layered as defaults, optional
//! architecture preset, config file, then `path=value` overrides.

use std::path::Path;

use clclsa_core::data::{MissingnessPolicy, SyntheticSpec};
use clclsa_core::eval::{RunOptions, Variant, WeightName};
use clclsa_core::model::{ModelConfig, WEIGHT_GRID};
use clclsa_core::train::{GridSpec, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub eta: f64,
    pub policy: MissingnessPolicy,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            eta: 0.2,
            policy: MissingnessPolicy::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub etas: Vec<f64>,
    /// Trials per cell; trial `t` uses seed `seed + t`.
    pub trials: usize,
    pub variants: Vec<Variant>,
    /// When nonempty, sweep each listed view subset instead.
    pub view_subsets: Vec<Vec<usize>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            etas: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            trials: 5,
            variants: vec![Variant::Full],
            view_subsets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub etas: Vec<f64>,
    pub trials: usize,
    pub variants: Vec<Variant>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            etas: vec![0.2, 0.4],
            trials: 5,
            variants: Variant::ABLATIONS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub fixed: WeightName,
    pub fixed_value: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub eta: f64,
    pub trials: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            fixed: WeightName::LambdaAl,
            fixed_value: 0.1,
            first: WEIGHT_GRID.to_vec(),
            second: WEIGHT_GRID.to_vec(),
            eta: 0.2,
            trials: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Copied into every seed field below when set.
    pub seed: Option<u64>,
    /// Architecture preset name; when set the model's dimensions must match
    /// the data, otherwise they are fitted to it.
    pub preset: Option<String>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SyntheticSpec,
    pub mask: MaskConfig,
    pub experiment: RunOptions,
    pub sweep: SweepConfig,
    pub grid: GridSpec,
    pub ablation: AblationConfig,
    pub surface: SurfaceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            preset: None,
            model: ModelConfig::default(),
            train: TrainConfig {
                epochs: 500,
                lr: 1e-3,
                ..TrainConfig::default()
            },
            synth: SyntheticSpec::default(),
            mask: MaskConfig::default(),
            experiment: RunOptions::default(),
            sweep: SweepConfig::default(),
            grid: GridSpec::default(),
            ablation: AblationConfig::default(),
            surface: SurfaceConfig::default(),
        }
    }
}

/// Seeds `seed, seed + 1, ...` for `trials` repetitions.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    (0..trials as u64).map(|t| seed.wrapping_add(t)).collect()
}

/// Parses `a.b.c=value`; the value is JSON when it parses as such and a
/// plain string otherwise.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value)> {
    let (path, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form path=value")))?;
    let keys: Vec<String> = path.split('.').map(str::to_string).collect();
    if keys.iter().any(String::is_empty) {
        return Err(Error::Config(format!("bad override path `{path}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((keys, value))
}

/// Replaces the existing leaf at `keys`; unknown paths are rejected.
pub fn set_path(root: &mut Value, keys: &[String], value: Value) -> Result<()> {
    let mut cur = root;
    for (depth, k) in keys.iter().enumerate() {
        cur = match cur {
            Value::Object(map) => map.get_mut(k),
            Value::Array(items) => k.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::Config(format!("unknown config field `{}`", keys[..=depth].join("."))))?;
    }
    *cur = value;
    Ok(())
}

/// Objects merge key by key; anything else replaces.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Everything needed to resolve a configuration.
#[derive(Debug, Clone, Default)]
pub struct Layers {
    pub file: Option<Value>,
    pub overrides: Vec<(Vec<String>, Value)>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
}

impl Layers {
    pub fn read_file(path: &Path) -> Result<Value> {
        let text = std::fs::read_to_string(path).map_err(crate::error::io(path))?;
        serde_json::from_str(&text).map_err(crate::error::json(path))
    }

    fn layer(&self, base: &RunConfig) -> Result<Value> {
        let mut v = serde_json::to_value(base).expect("config serializes");
        if let Some(file) = &self.file {
            if !file.is_object() {
                return Err(Error::Config("config file must hold a JSON object".into()));
            }
            merge(&mut v, file.clone());
        }
        for (keys, value) in &self.overrides {
            set_path(&mut v, keys, value.clone())?;
        }
        if let Some(p) = &self.preset {
            v["preset"] = Value::String(p.clone());
        }
        if let Some(s) = self.seed {
            v["seed"] = Value::from(s);
        }
        Ok(v)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let parse = |v: Value| -> Result<RunConfig> {
            serde_json::from_value(v).map_err(|e| Error::Config(format!("invalid config: {e}")))
        };
        let mut cfg = parse(self.layer(&RunConfig::default())?)?;
        if let Some(name) = cfg.preset.clone() {
            let model = ModelConfig::preset(&name)
                .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
            let base = RunConfig {
                model,
                ..RunConfig::default()
            };
            cfg = parse(self.layer(&base)?)?;
        }
        if let Some(seed) = cfg.seed {
            cfg.train.seed = seed;
            cfg.synth.seed = seed;
        }
        Ok(cfg)
    }
}

impl RunConfig {
    /// Architecture for data with the given view widths and class count.
    pub fn model_for(&self, dims: &[usize], num_classes: usize) -> Result<ModelConfig> {
        let mut m = self.model.clone();
        if self.preset.is_some() {
            if m.input_dims != dims || m.num_classes != num_classes {
                return Err(Error::Config(format!(
                    "preset expects views {:?} with {} classes, data has {dims:?} with {num_classes}",
                    m.input_dims, m.num_classes
                )));
            }
        } else {
            let embed = m.embed_dim().max(1);
            m.input_dims = dims.to_vec();
            m.embed_dims = vec![embed; dims.len()];
            m.num_classes = num_classes;
        }
        m.validate()?;
        Ok(m)
    }
}
