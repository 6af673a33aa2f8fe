use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::io::atomic_write;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to reproduce and audit a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub results: Value,
}

impl RunRecord {
    pub fn new(kind: &str, config: &RunConfig, results: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            config: config.clone(),
            config_hash: config.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            results,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    checksum: String,
    record: Value,
}

// serde_json maps are key-sorted, so the compact text is canonical.
fn digest(record: &Value) -> String {
    hex::encode(Sha256::digest(serde_json::to_string(record).expect("json value serializes").as_bytes()))
}

pub fn persist_run(record: &RunRecord, path: &Path) -> Result<()> {
    let value = serde_json::to_value(record).map_err(|e| Error::Parse(e.to_string()))?;
    let env = Envelope { checksum: digest(&value), record: value };
    let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Parse(e.to_string()))?;
    atomic_write(path, text.as_bytes())
}

pub fn load_run(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path)?;
    let env: Envelope = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if digest(&env.record) != env.checksum {
        return Err(Error::Checksum);
    }
    let found = env.record.get("schema_version").and_then(Value::as_u64).ok_or_else(|| Error::Parse("missing schema_version".into()))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::Schema { found: found as u32, expected: SCHEMA_VERSION });
    }
    serde_json::from_value(env.record).map_err(|e| Error::Parse(e.to_string()))
}
