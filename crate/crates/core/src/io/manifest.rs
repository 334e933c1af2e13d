//! Run manifests: config digest, seeds, timing and a hashed file inventory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::Result;
use crate::integrator::digest64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: u64,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub exit_code: i32,
    /// Set when the run ended before writing everything it planned to.
    pub partial: bool,
    pub files: Vec<FileEntry>,
    pub config: RunConfig,
}

/// Digest of the compact JSON echo of a resolved config.
pub fn config_digest(cfg: &RunConfig) -> u64 {
    digest64(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

pub fn now_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            config_digest: config_digest(config),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            started: now_seconds(),
            finished: 0.0,
            exit_code: 0,
            partial: false,
            files: Vec::new(),
            config: config.clone(),
        }
    }

    /// Hashes `dir/relative` and adds it to the inventory.
    pub fn record_file(&mut self, dir: &Path, relative: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(relative))?;
        self.files.retain(|f| f.path != relative);
        self.files.push(FileEntry { path: relative.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn digest_matches(&self) -> bool {
        config_digest(&self.config) == self.config_digest
    }

    /// Files whose current content differs from the recorded hash.
    pub fn stale_files(&self, dir: &Path) -> Vec<PathBuf> {
        self.files
            .iter()
            .filter(|f| std::fs::read(dir.join(&f.path)).map(|b| sha256_hex(&b) != f.sha256).unwrap_or(true))
            .map(|f| dir.join(&f.path))
            .collect()
    }

    pub fn write(&mut self, dir: &Path, exit_code: i32, partial: bool) -> Result<()> {
        self.finished = now_seconds();
        self.exit_code = exit_code;
        self.partial = partial;
        let text = serde_json::to_string_pretty(self)?;
        super::write_atomic(&dir.join(super::MANIFEST_FILE), text.as_bytes())
    }
}
