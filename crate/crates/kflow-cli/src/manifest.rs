//! Run manifests: every command records its resolved configuration, seeds,
//! inputs, and hashed outputs, enough to re-run it exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use kflow::io::atomic_write;

#[derive(Debug, Serialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
    pub wall_ms: f64,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config<T: Serialize>(&mut self, value: &T) -> anyhow::Result<()> {
        self.config = serde_json::to_value(value)?;
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    /// Records an input file; a directory records every file inside it,
    /// sorted by name.
    pub fn input(&mut self, path: &Path) {
        if path.is_dir() {
            if let Ok(entries) = std::fs::read_dir(path) {
                let mut files: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok())
                    .map(|e| e.path())
                    .filter(|p| p.is_file())
                    .collect();
                files.sort();
                self.inputs.extend(files);
            }
        } else {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Hashes all referenced files and writes `manifest.json` atomically
    /// into `dir`.
    pub fn write(self, dir: &Path) -> anyhow::Result<PathBuf> {
        let manifest = RunManifest {
            tool: "kflow",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            argv: std::env::args().collect(),
            config: self.config,
            seeds: self.seeds,
            inputs: self
                .inputs
                .iter()
                .map(|p| file_ref(p))
                .collect::<anyhow::Result<_>>()?,
            outputs: self
                .outputs
                .iter()
                .map(|p| file_ref(p))
                .collect::<anyhow::Result<_>>()?,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        let path = dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        atomic_write(&path, &bytes)?;
        Ok(path)
    }
}

fn file_ref(path: &Path) -> anyhow::Result<FileRef> {
    let bytes = std::fs::read(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(FileRef {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
        bytes: bytes.len() as u64,
    })
}
