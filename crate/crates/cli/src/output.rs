//! Artifact emission: data files, `summary.json` and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use acan_core::model::CircuitConfig;
use acan_core::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical config JSON.
pub fn config_hash(cfg: &CircuitConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}

/// Reproducibility record written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub subcommand: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

/// Data files collected in memory and written by one sequential writer.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Adds a CSV produced by `write` into a buffer.
    pub fn add_csv<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }
}

/// Writes every collected file plus `summary.json` into `dir`; returns the file names.
pub fn emit_outputs<S: Serialize>(mut outputs: Outputs, summary: &S, dir: &Path) -> Result<Vec<String>> {
    outputs.add_json("summary.json", summary)?;
    fs::create_dir_all(dir)?;
    for (name, bytes) in &outputs.files {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(outputs.names())
}

pub fn write_manifest(manifest: &RunManifest, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    fs::write(&path, bytes)?;
    Ok(path)
}
