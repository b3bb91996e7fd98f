//! Run manifests: everything needed to reproduce one invocation.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use outliernet::seed;
use serde::{Deserialize, Serialize};

use crate::args::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Root seed given on the command line.
    pub seed: u64,
    /// Per-purpose sub-seeds actually drawn during the run.
    pub seeds: BTreeMap<String, u64>,
    pub workers: usize,
    /// The parsed command with every default filled in.
    pub command: Command,
    /// Library configurations as the run used them.
    pub resolved: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// Bookkeeping collected while a command runs.
#[derive(Debug)]
pub struct Run {
    pub seed: u64,
    pub workers: usize,
    seeds: BTreeMap<String, u64>,
    resolved: BTreeMap<String, serde_json::Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(seed: u64, workers: usize) -> Self {
        Self {
            seed,
            workers,
            seeds: BTreeMap::new(),
            resolved: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Sub-seed for one purpose, recorded in the manifest.
    pub fn seed_for(&mut self, purpose: &str) -> u64 {
        let s = seed::derive(self.seed, purpose);
        self.seeds.insert(purpose.to_string(), s);
        s
    }

    pub fn resolve(&mut self, key: &str, value: &impl Serialize) {
        let v = serde_json::to_value(value).expect("config serialises");
        self.resolved.insert(key.to_string(), v);
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn finish(self, command: Command, started_at: String) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: command.name().to_string(),
            seed: self.seed,
            seeds: self.seeds,
            workers: self.workers,
            command,
            resolved: self.resolved,
            inputs: self.inputs,
            outputs: self.outputs,
            started_at,
            finished_at: now(),
        }
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)
        .and_then(|()| f.sync_all())
        .with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}
