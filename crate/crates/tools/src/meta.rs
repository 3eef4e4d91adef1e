//! Provenance header attached to every output file.
//!
//! The header holds no timestamps or host details, so a rerun with the same
//! configuration reproduces every file byte for byte.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Meta {
    pub tool: String,
    pub tool_version: String,
    pub core_version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub rng: String,
    pub seeds: Vec<u64>,
}

impl Meta {
    pub fn new<C: Serialize>(command: &str, config: &C, seeds: &[u64]) -> Self {
        Self {
            tool: "cmc".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            core_version: cmc_core::VERSION.into(),
            command: command.into(),
            config_hash: config_hash(config),
            rng: cmc_core::rng::RNG_ALGORITHM.into(),
            seeds: seeds.to_vec(),
        }
    }

    /// Writes the header as `# key: value` lines.
    pub fn write_comments(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "# tool: {} {}", self.tool, self.tool_version)?;
        writeln!(w, "# core: {}", self.core_version)?;
        writeln!(w, "# command: {}", self.command)?;
        writeln!(w, "# config_hash: {}", self.config_hash)?;
        writeln!(w, "# rng: {}", self.rng)?;
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        writeln!(w, "# seeds: {}", seeds.join(","))?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the JSON form. Struct fields serialize in declaration order
/// and maps are sorted, so equal configurations hash equally.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let value = serde_json::to_value(config).expect("configurations serialize");
    hex(&Sha256::digest(value.to_string().as_bytes()))
}

/// First eight bytes of the configuration hash, as stored in binary
/// trajectory headers.
pub fn short_hash<C: Serialize>(config: &C) -> u64 {
    let value = serde_json::to_value(config).expect("configurations serialize");
    let digest = Sha256::digest(value.to_string().as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
