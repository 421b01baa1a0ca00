use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SEED_VAR: &str = "PADIC_POLYGON_SEED";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub sha256: String,
}

/// Provenance of one run. The digest covers every field except the wall
/// time, so identical runs embed identical digests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub p: Option<u64>,
    pub flags: BTreeMap<String, String>,
    /// Recorded only; nothing in the computation is random.
    pub seed: Option<String>,
}

#[derive(Serialize)]
pub struct TimedManifest<'a> {
    #[serde(flatten)]
    pub manifest: &'a RunManifest,
    pub digest: String,
    pub wall_time_ms: u128,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: Vec::new(),
            p: None,
            flags: BTreeMap::new(),
            seed: std::env::var(SEED_VAR).ok(),
        }
    }

    pub fn input(&mut self, role: &str, bytes: &[u8]) {
        self.inputs.push(InputDigest { role: role.into(), sha256: sha256_hex(bytes) });
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.flags.insert(name.into(), value.to_string());
    }

    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    /// Writes `<output>.manifest.json` with the wall time.
    pub fn write_sidecar(&self, output: &Path, wall_time_ms: u128) -> Result<()> {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        let t = TimedManifest { manifest: self, digest: self.digest(), wall_time_ms };
        let mut text = serde_json::to_string_pretty(&t)?;
        text.push('\n');
        std::fs::write(&name, text).with_context(|| format!("writing {}", Path::new(&name).display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_tracks_flags() {
        let mut a = RunManifest::new("oracle");
        a.seed = None;
        let b = a.clone();
        assert_eq!(a.digest(), b.digest());
        a.flag("N", 150);
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
