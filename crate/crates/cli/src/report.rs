use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use lcgm_core::io::to_canonical_json;

/// Accumulates everything a command read so the report can name its inputs
/// by hash.
#[derive(Debug, Default)]
pub struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    pub fn new(command: &str) -> Self {
        let mut inputs = Inputs::default();
        inputs.add("command", command.as_bytes());
        inputs
    }

    pub fn add(&mut self, name: &str, bytes: &[u8]) {
        for part in [name.as_bytes(), bytes] {
            self.hasher.update((part.len() as u64).to_le_bytes());
            self.hasher.update(part);
        }
    }

    pub fn add_params(&mut self, params: &Value) {
        self.add("params", to_canonical_json(params).as_bytes());
    }

    pub fn digest(self) -> String {
        format!("sha256:{}", hex::encode(self.hasher.finalize()))
    }
}

#[derive(Debug)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub body: Value,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        to_canonical_json(&json!({
            "command": self.command,
            "inputs_digest": self.inputs_digest,
            "body": self.body,
            "warnings": self.warnings,
        }))
    }
}
