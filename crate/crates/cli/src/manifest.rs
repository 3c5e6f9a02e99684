//! Run manifest: the digests and paths needed to reproduce a run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qfolio_core::config::{Config, DateRange};
use qfolio_core::error::{Error, Result};

/// Reproducibility record written next to every `train` run's artifacts.
/// Re-running with the same config hash, seed, and data digest reproduces
/// identical reports on one platform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub data_sha256: String,
    pub rng_seed: u64,
    pub train_range: DateRange,
    pub test_range: DateRange,
    /// Artifact name -> path, e.g. "checkpoint" -> "out/checkpoint.json".
    pub artifacts: BTreeMap<String, String>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(config: &Config, data_path: &Path) -> Result<Self> {
        Ok(Self {
            config_sha256: sha256_hex(&serde_json::to_vec(config)?),
            data_sha256: sha256_file(data_path)?,
            rng_seed: config.rng_seed,
            train_range: config.train_range,
            test_range: config.test_range,
            artifacts: BTreeMap::new(),
            duration_seconds: 0.0,
        })
    }

    pub fn record_artifact(&mut self, name: &str, path: &Path) {
        self.artifacts
            .insert(name.to_string(), path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}
