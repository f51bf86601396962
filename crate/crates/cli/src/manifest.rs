//! The run manifest: a deterministic record of one invocation — command,
//! seeds, resolved parameters, input digests, output names, and crate
//! versions — sufficient to reproduce every artifact byte for byte. It
//! deliberately contains no timestamps or host details, so two identical
//! runs produce identical manifests.

use gduplan::Result;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: Vec<String>,
    pub versions: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command_path: &[&str], seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("gduplan".to_string(), gduplan::VERSION.to_string());
        versions.insert(
            "gduplan-cli".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        Manifest {
            command: command_path.join(" "),
            seed,
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            versions,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("manifest parameters are plain data");
        self.parameters.insert(key.to_string(), value);
    }

    /// Record an input file from the bytes already read for parsing, so the
    /// digest is of exactly what the run consumed.
    pub fn input(&mut self, label: &str, path: &Path, bytes: &[u8]) {
        self.inputs.insert(
            label.to_string(),
            InputDigest {
                path: path.display().to_string(),
                bytes: bytes.len(),
                sha256: crate::runio::sha256_hex(bytes),
            },
        );
    }

    /// Write `bytes` into the output directory and record the file name.
    pub fn emit(&mut self, out_dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        crate::runio::write_bytes(&out_dir.join(name), bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Finish the run: write `manifest.json` alongside the other outputs.
    pub fn write(mut self, out_dir: &Path) -> Result<()> {
        self.outputs.sort();
        let mut json = serde_json::to_vec_pretty(&self)?;
        json.push(b'\n');
        crate::runio::write_bytes(&out_dir.join("manifest.json"), &json)
    }
}
