//! Per-run record of what went in and what came out, for reproducibility checks.

use kgcot_core::digest::{file_sha256, write_atomic};
use serde::{Deserialize, Serialize};
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> io::Result<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: file_sha256(path)?, bytes: std::fs::metadata(path)?.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

/// Times a stage from construction to [`RunManifest::finish_stage`].
pub struct StageTimer {
    name: String,
    started: Instant,
}

impl StageTimer {
    pub fn start(name: &str) -> Self {
        Self { name: name.to_string(), started: Instant::now() }
    }
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash,
            seed,
            stages: Vec::new(),
        }
    }

    pub fn finish_stage(&mut self, timer: StageTimer, inputs: &[&Path], outputs: &[&Path]) -> io::Result<()> {
        let digest = |ps: &[&Path]| ps.iter().map(|p| FileDigest::of(p)).collect::<io::Result<Vec<_>>>();
        self.stages.push(StageRecord {
            name: timer.name,
            inputs: digest(inputs)?,
            outputs: digest(outputs)?,
            wall_ms: timer.started.elapsed().as_millis() as u64,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Re-hashes every recorded file; returns a description of each mismatch.
    pub fn verify(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for stage in &self.stages {
            for f in stage.inputs.iter().chain(&stage.outputs) {
                match FileDigest::of(&f.path) {
                    Ok(now) if now.sha256 == f.sha256 => {}
                    Ok(_) => problems.push(format!("{}: {} changed", stage.name, f.path.display())),
                    Err(e) => problems.push(format!("{}: {}: {e}", stage.name, f.path.display())),
                }
            }
        }
        problems
    }

    /// Conventional location: `<out>/<command>.manifest.json`.
    pub fn path_in(out: &Path, command: &str) -> PathBuf {
        out.join(format!("{command}.manifest.json"))
    }
}
