use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Config, Seeds};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> anyhow::Result<Self> {
        let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self { path: path.to_path_buf(), bytes: data.len() as u64, sha256: hex::encode(Sha256::digest(&data)) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

/// What a run read, wrote and was configured with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub versions: Versions,
    pub seeds: Seeds,
    pub config: Config,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    /// Columns or tables left out, with the reason.
    pub skipped: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &Config, seeds: Seeds) -> Self {
        Self {
            command: command.into(),
            versions: Versions { cli: env!("CARGO_PKG_VERSION").into(), core: ambihedge::VERSION.into() },
            seeds,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(FileRecord::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(FileRecord::of(path)?);
        Ok(())
    }

    pub fn skip(&mut self, what: String) {
        eprintln!("skipped: {what}");
        self.skipped.push(what);
    }

    /// Writes `manifest-<command>.json` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(format!("manifest-{}.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
