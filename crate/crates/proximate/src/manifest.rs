//! Run manifest written next to every command's outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub version: &'static str,
    /// SHA-256 of the effective settings serialized as JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    /// Command-specific results such as a chosen m.
    pub notes: BTreeMap<String, serde_json::Value>,
}

/// Hash of a settings value. serde_json writes struct fields in declaration
/// order and maps in key order, so the text (and hash) is the same on every
/// platform.
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("a JSON value always serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command_line: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config_hash(&config),
            config,
            seed,
            started: now(),
            finished: String::new(),
            outputs: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
    }

    /// Stamp the finish time and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<Self, CliError> {
        self.finished = now();
        self.outputs.sort();
        self.outputs.dedup();
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(self)
    }
}
