//! `manifest.json`: what was run, with which configuration, and digests of
//! every file it wrote.

use crate::error::{Error, Result};
use crate::integrands::CATALOG_VERSION;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub catalog_version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// SHA-256 of the compact JSON of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub started_utc: String,
    pub finished_utc: String,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(config: &serde_json::Value) -> String {
    sha256_hex(config.to_string().as_bytes())
}

pub fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value, started_utc: String) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            catalog_version: CATALOG_VERSION.to_string(),
            command: command.to_string(),
            seed,
            config_hash: config_hash(&config),
            config,
            started_utc,
            finished_utc: String::new(),
            outputs: Vec::new(),
        }
    }

    /// Writes the manifest next to the listed outputs.
    pub fn write(mut self, dir: &Path) -> Result<()> {
        self.finished_utc = now_utc();
        let text = serde_json::to_string_pretty(&self).map_err(|e| Error::Execution(e.to_string()))? + "\n";
        std::fs::write(dir.join(MANIFEST_FILE), text).map_err(|e| Error::Execution(format!("writing manifest: {e}")))
    }
}

/// Recomputes the config hash and every output digest. Returns the list of
/// mismatches; empty means the manifest verifies.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
    let mut bad = Vec::new();
    if config_hash(&m.config) != m.config_hash {
        bad.push("config_hash".to_string());
    }
    for o in &m.outputs {
        match std::fs::read(dir.join(&o.path)) {
            Ok(bytes) if sha256_hex(&bytes) == o.sha256 => {}
            Ok(_) => bad.push(format!("{}: digest differs", o.path)),
            Err(e) => bad.push(format!("{}: {e}", o.path)),
        }
    }
    Ok(bad)
}
