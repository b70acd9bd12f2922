//! Per-run manifest tying outputs to the configuration that produced them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::output::io_err;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started: now(),
            finished: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Stamps the end time and writes `manifest.json` into `dir`, after checking
    /// that every listed output exists.
    pub fn finish(mut self, dir: &Path) -> Result<Self, CliError> {
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(CliError::Io {
                path: missing.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "output missing at end of run"),
            });
        }
        self.finished = now();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(self)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
