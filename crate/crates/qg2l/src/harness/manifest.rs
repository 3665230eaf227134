//! Run manifests: config hash, code version, seeds and per-artifact
//! checksums. Wall-clock time lives only here, never inside artifacts, so
//! replaying a manifest can compare artifact bytes exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArtifactChecksum {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    /// Normalized config text, embedded so a manifest is self-contained.
    pub config_text: String,
    pub master_seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<ArtifactChecksum>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn checksum_file(dir: &Path, name: &str) -> std::io::Result<ArtifactChecksum> {
    let bytes = std::fs::read(dir.join(name))?;
    Ok(ArtifactChecksum { name: name.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), json)
    }

    pub fn load(path: &Path) -> Result<RunManifest, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read manifest: {e}"))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| format!("invalid manifest JSON: {e}"))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(format!("unsupported manifest schema version {}", m.schema_version));
        }
        Ok(m)
    }
}
