//! Per-run record of what was executed, on what, and what it produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{io, json, Result};
use crate::io::write_atomic;

pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
    pub version: String,
    pub threads: usize,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, config: RunConfig, threads: usize) -> Self {
        Self {
            command: command.to_string(),
            args,
            config,
            seeds: Vec::new(),
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            duration_secs: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn add_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(json(path))?;
        write_atomic(path, (text + "\n").as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(RUN_MANIFEST)
}
