//! Run-directory manifest: what produced the outputs and their checksums.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{PipelineConfig, CONFIG_VERSION};
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub crate_version: String,
    pub config_version: u32,
    pub config_hash: String,
    pub seed: u64,
    /// File name relative to the run directory -> sha256 hex.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_version: CONFIG_VERSION,
            config_hash: config.hash()?,
            seed: config.seed,
            files: BTreeMap::new(),
        })
    }

    /// Record a file already written under `dir`.
    pub fn add_file(&mut self, dir: &Path, name: &str) -> Result<()> {
        let bytes = fs::read(dir.join(name))?;
        self.files.insert(name.to_string(), hex(&Sha256::digest(&bytes)));
        Ok(())
    }

    /// Write into `dir`, merging with any manifest already there so that
    /// successive stages in one run directory accumulate.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut out = self.clone();
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(old) = serde_json::from_str::<Manifest>(&text) {
                for (k, v) in old.files {
                    out.files.entry(k).or_insert(v);
                }
                if old.command != self.command {
                    out.command = format!("{} + {}", old.command, self.command);
                }
            }
        }
        fs::write(path, serde_json::to_string_pretty(&out)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_hash_and_accumulates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::default();
        fs::write(dir.path().join("a.txt"), "abc").unwrap();
        let mut m = Manifest::new("generate", &cfg).unwrap();
        m.add_file(dir.path(), "a.txt").unwrap();
        m.save(dir.path()).unwrap();
        assert_eq!(m.files["a.txt"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        fs::write(dir.path().join("b.txt"), "x").unwrap();
        let mut n = Manifest::new("preprocess", &cfg).unwrap();
        n.add_file(dir.path(), "b.txt").unwrap();
        n.save(dir.path()).unwrap();
        let back = Manifest::load(dir.path()).unwrap();
        assert_eq!(back.files.len(), 2);
        assert_eq!(back.command, "generate + preprocess");
        assert_eq!(back.config_hash, cfg.hash().unwrap());
        assert!(m.add_file(dir.path(), "missing").is_err());
    }
}
