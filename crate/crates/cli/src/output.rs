use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use nsni_core::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const DEFAULT_DIR: &str = "nsni-out";

/// Created output directory for `cfg`.
pub fn directory(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = PathBuf::from(cfg.output_dir.as_deref().unwrap_or(DEFAULT_DIR));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the effective configuration, excluding where output goes.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    sha256_hex(c.to_json().as_bytes())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
pub struct Seeds {
    pub mc: u64,
    pub ssfm: u64,
}

/// Record of one command invocation, enough to reproduce its outputs.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_name: &'a str,
    pub config_sha256: String,
    pub seeds: Seeds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_symbol: Option<usize>,
    pub outputs: Vec<String>,
    pub config: &'a RunConfig,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'static str, cfg: &'a RunConfig) -> Manifest<'a> {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_name: &cfg.name,
            config_sha256: config_hash(cfg),
            seeds: Seeds { mc: cfg.mc.seed, ssfm: cfg.ssfm.seed },
            samples_per_symbol: None,
            outputs: Vec::new(),
            config: cfg,
        }
    }

    pub fn write(mut self, dir: &Path, outputs: &[&str]) -> anyhow::Result<()> {
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        write_json(&dir.join("manifest.json"), &self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_dir() {
        let a = nsni_core::config::config2();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(config_hash(&a), config_hash(&b));
        b.plan.channels = 3;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
