//! Run manifests: what was run, with which seeds, and what it wrote.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use airfc::config::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    /// The resolved configuration; together with the seeds below it
    /// determines every output bit for bit.
    pub config: ExperimentConfig,
    pub base_seed: u64,
    pub task_seed: u64,
    /// Seed of each realization, in trial order.
    pub trial_seeds: Vec<u64>,
    /// SHA-256 of the external weights file, when one is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_sha256: Option<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_sha256(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Inventory entries for `names` inside `dir`, in the given order.
pub fn inventory(dir: &Path, names: &[String]) -> std::io::Result<Vec<OutputEntry>> {
    names
        .iter()
        .map(|name| {
            let data = std::fs::read(dir.join(name))?;
            Ok(OutputEntry {
                path: name.clone(),
                bytes: data.len() as u64,
                sha256: sha256_hex(&data),
            })
        })
        .collect()
}
