//! JSON run manifests written next to every output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Every resolved flag value, including defaults.
    pub config: Value,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub version: String,
    /// Free-form notes on the processing pipeline.
    pub pipeline: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            seed,
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            version: env!("CARGO_PKG_VERSION").to_string(),
            pipeline: Vec::new(),
        })
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> Result<String> {
        // serde_json's default map is ordered by key
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn write_next_to(&self, output: &Path) -> Result<PathBuf> {
        let path = sidecar(output, "manifest.json");
        std::fs::write(&path, self.to_json()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// `dir/name.ext` -> `dir/name.ext.<suffix>`.
pub fn sidecar(output: &Path, suffix: &str) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    output.with_file_name(name)
}
