//! Machine-readable record of a run, written as `manifest.json`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub bvtail: String,
    pub bvtail_cli: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            bvtail: bvtail::VERSION.to_string(),
            bvtail_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub versions: Versions,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: impl Serialize, seed: u64) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            versions: Versions::default(),
            timings: BTreeMap::new(),
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        })
    }

    /// Runs `f` and records its duration under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings
            .insert(phase.to_string(), start.elapsed().as_secs_f64());
        Ok(out)
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.outputs.push(FILE_NAME.to_string());
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
