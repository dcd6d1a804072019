//! Report envelopes: every machine-readable output embeds the tool
//! version, the subcommand, the configuration hash and the seed, so runs
//! are reproducible byte for byte at a fixed seed.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    #[serde(flatten)]
    pub payload: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(subcommand: &'static str, config_sha256: &str, seed: u64, payload: T) -> Self {
        Self {
            tool: "linkvar",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_sha256: config_sha256.to_string(),
            seed,
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Error payload written when a stage fails; the JSON report is always
/// produced even on failure.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorPayload {
    pub error: String,
}
