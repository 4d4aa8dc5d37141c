//! Run manifests: every command writes one alongside its outputs, recording
//! the resolved configuration, input hashes, output list, and timings. A
//! manifest plus the input files is enough to reproduce every output
//! bit-identically (timings are the one informational, non-reproducible
//! field).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use betashap_core::Result;

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility_evaluations: Option<u64>,
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            utility_evaluations: None,
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn record_timing(&mut self, phase: &str, elapsed: std::time::Duration) {
        self.timings_ms.insert(phase.to_string(), elapsed.as_millis());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
