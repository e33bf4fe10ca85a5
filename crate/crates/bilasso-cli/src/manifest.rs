//! Run manifests: one `manifest.json` per output directory capturing the
//! frozen configuration, seed, input checksums, software version, and
//! wall-clock duration.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// file name → SHA-256 hex digest of each input file.
    pub input_checksums: serde_json::Map<String, serde_json::Value>,
    pub version: String,
    pub duration_secs: f64,
}

pub struct ManifestBuilder {
    subcommand: String,
    config: serde_json::Value,
    seed: Option<u64>,
    checksums: serde_json::Map<String, serde_json::Value>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config,
            seed,
            checksums: serde_json::Map::new(),
            started: Instant::now(),
        }
    }

    pub fn checksum_input(&mut self, path: &Path) -> Result<()> {
        let bytes =
            std::fs::read(path).with_context(|| format!("checksumming {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.checksums
            .insert(name, serde_json::Value::String(format!("{digest:x}")));
        Ok(())
    }

    /// Merge extra key/value pairs into the config snapshot (e.g. statuses
    /// determined at runtime).
    pub fn annotate(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut self.config {
            map.insert(key.to_string(), value);
        }
    }

    pub fn write(self, out_dir: &Path) -> Result<()> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            config: self.config,
            seed: self.seed,
            input_checksums: self.checksums,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
