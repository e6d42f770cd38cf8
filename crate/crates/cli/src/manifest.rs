//! The run manifest: config hash, artifact paths, timestamps. Written
//! incrementally as commands complete, so any artifact can be traced
//! back to the exact configuration that produced it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::errors::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config_path: String,
    pub library_version: String,
    pub created_at_epoch_secs: u64,
    pub updated_at_epoch_secs: u64,
    /// artifact name -> path relative to the output directory
    pub artifacts: BTreeMap<String, String>,
}

pub fn config_hash(raw_config: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw_config.as_bytes());
    format!("sha256:{:x}", hasher.finalize())
}

fn now_epoch() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config_path: &Path, raw_config: &str) -> Self {
        let now = now_epoch();
        RunManifest {
            config_hash: config_hash(raw_config),
            config_path: config_path.display().to_string(),
            library_version: scriptprobe::VERSION.to_string(),
            created_at_epoch_secs: now,
            updated_at_epoch_secs: now,
            artifacts: BTreeMap::new(),
        }
    }

    /// Loads the existing manifest or starts a fresh one; a config
    /// hash change invalidates recorded artifacts.
    pub fn load_or_new(output_dir: &Path, config_path: &Path, raw_config: &str) -> Self {
        let path = output_dir.join(MANIFEST_FILE);
        if let Ok(raw) = std::fs::read_to_string(&path) {
            if let Ok(mut m) = serde_json::from_str::<RunManifest>(&raw) {
                if m.config_hash == config_hash(raw_config) {
                    m.updated_at_epoch_secs = now_epoch();
                    return m;
                }
                log::warn!("config changed since the last run; starting a fresh manifest");
            }
        }
        RunManifest::new(config_path, raw_config)
    }

    pub fn record(&mut self, name: &str, relative_path: impl Into<String>) {
        self.artifacts.insert(name.to_string(), relative_path.into());
    }

    pub fn save(&mut self, output_dir: &Path) -> CliResult<()> {
        if !self.complete(output_dir) {
            log::warn!("manifest lists artifacts that are missing on disk");
        }
        self.updated_at_epoch_secs = now_epoch();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(output_dir.join(MANIFEST_FILE), json)?;
        Ok(())
    }

    /// Resolves a recorded artifact, failing with a dependency error
    /// that names the missing file and the producing command.
    pub fn require(
        &self,
        output_dir: &Path,
        name: &str,
        produced_by: &str,
    ) -> CliResult<PathBuf> {
        let rel = self.artifacts.get(name).ok_or_else(|| {
            CliError::dependency(format!(
                "artifact {name:?} is not recorded in {}; run `scriptprobe {produced_by}` first",
                output_dir.join(MANIFEST_FILE).display()
            ))
        })?;
        let path = output_dir.join(rel);
        if !path.exists() {
            return Err(CliError::dependency(format!(
                "missing artifact {name:?} at {}; run `scriptprobe {produced_by}` first",
                path.display()
            )));
        }
        Ok(path)
    }

    /// True iff every recorded artifact exists on disk.
    pub fn complete(&self, output_dir: &Path) -> bool {
        self.artifacts.values().all(|rel| output_dir.join(rel).exists())
    }
}
