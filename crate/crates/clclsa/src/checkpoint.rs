//! Model checkpoints: a JSON document, or a binary file holding a JSON
//! header followed by little-endian `f64` parameter data.

use std::fs;
use std::path::Path;

use clclsa_core::model::{Model, ModelConfig};
use clclsa_core::numerics::{ParamStore, RunningStats, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{io, json, Error, Result};
use crate::io::write_atomic;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CLCLSAv1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub params: ParamStore,
    pub bn_stats: Vec<RunningStats>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: model.config().clone(),
            params: model.params().clone(),
            bn_stats: model.bn_stats().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        Ok(Model::from_parts(self.config, self.params, self.bn_stats)?)
    }
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    format_version: u32,
    config: ModelConfig,
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
    /// Widths of the batch-norm layers, in order.
    bn_widths: Vec<usize>,
}

/// Saves as JSON, or in the binary layout when `path` ends in `.bin`.
pub fn save(path: &Path, model: &Model) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        save_binary(path, model)
    } else {
        let ckpt = Checkpoint::from_model(model);
        let text = serde_json::to_vec(&ckpt).map_err(json(path))?;
        write_atomic(path, &text)
    }
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(io(path))?;
    if bytes.starts_with(MAGIC) {
        return load_binary(path, &bytes);
    }
    let ckpt: Checkpoint = serde_json::from_slice(&bytes).map_err(json(path))?;
    ckpt.into_model()
}

fn save_binary(path: &Path, model: &Model) -> Result<()> {
    let params = model.params();
    let header = BinaryHeader {
        format_version: FORMAT_VERSION,
        config: model.config().clone(),
        names: params.iter().map(|(_, n, _)| n.to_string()).collect(),
        shapes: params.iter().map(|(_, _, t)| t.shape()).collect(),
        bn_widths: model.bn_stats().iter().map(|s| s.mean.len()).collect(),
    };
    let head = serde_json::to_vec(&header).map_err(json(path))?;
    let mut out = Vec::with_capacity(16 + head.len() + 8 * params.total_len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(head.len() as u64).to_le_bytes());
    out.extend_from_slice(&head);
    let mut push = |v: &[f64]| {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    for (_, _, t) in params.iter() {
        push(t.data());
    }
    for s in model.bn_stats() {
        push(&s.mean);
        push(&s.var);
    }
    write_atomic(path, &out)
}

fn load_binary(path: &Path, bytes: &[u8]) -> Result<Model> {
    let truncated = || Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: "truncated checkpoint".into(),
    };
    let len_bytes: [u8; 8] = bytes.get(8..16).ok_or_else(truncated)?.try_into().unwrap();
    let head_len = u64::from_le_bytes(len_bytes) as usize;
    let head = bytes.get(16..16 + head_len).ok_or_else(truncated)?;
    let header: BinaryHeader = serde_json::from_slice(head).map_err(json(path))?;
    let mut data = bytes[16 + head_len..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = data.by_ref().take(n).collect();
        if v.len() == n {
            Ok(v)
        } else {
            Err(truncated())
        }
    };
    let mut params = ParamStore::new();
    for (name, &(r, c)) in header.names.iter().zip(&header.shapes) {
        params.add(name.clone(), Tensor::from_vec(r, c, take(r * c)?)?);
    }
    let mut bn_stats = Vec::with_capacity(header.bn_widths.len());
    for &w in &header.bn_widths {
        bn_stats.push(RunningStats {
            mean: take(w)?,
            var: take(w)?,
        });
    }
    Checkpoint {
        format_version: header.format_version,
        config: header.config,
        params,
        bn_stats,
    }
    .into_model()
}
