//! Run manifest written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector, enough to rerun the command.
    pub args: Vec<String>,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_secs: f64,
    pub version: String,
    /// Command-specific results (losses, rejection counts, metrics).
    pub results: Value,
}

pub struct Recorder {
    start: Instant,
    pub manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Self {
            start: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                args: std::env::args().collect(),
                config: Value::Null,
                seeds: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_time_secs: 0.0,
                version: env!("CARGO_PKG_VERSION").to_string(),
                results: Value::Null,
            },
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.manifest.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.manifest.outputs.push(p.to_path_buf());
    }

    /// Writes to `path`, or to `<first output>.manifest.json`.
    pub fn finish(mut self, path: Option<&Path>) -> anyhow::Result<PathBuf> {
        self.manifest.wall_time_secs = self.start.elapsed().as_secs_f64();
        let target = match path {
            Some(p) => p.to_path_buf(),
            None => {
                let first = self.manifest.outputs.first().context("no output to place the manifest next to")?;
                let mut s = first.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            }
        };
        let json = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&target, json + "\n").with_context(|| format!("writing {}", target.display()))?;
        Ok(target)
    }
}

/// `base` with `suffix` appended to the file name.
pub fn sidecar(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
