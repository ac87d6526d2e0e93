//! Index written next to reproduced figure data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub panel: String,
    pub description: String,
    pub sha256: String,
}

/// A value taken from the paper, with the statement it comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchored {
    pub value: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub figure: String,
    pub tool: String,
    pub seed: u64,
    pub rng: String,
    /// SHA-256 of the canonical config text saved as `config.ini`.
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
    pub paper_anchored: BTreeMap<String, Anchored>,
    /// Values chosen for the synthetic analog, not stated in the paper.
    pub synthetic: BTreeMap<String, String>,
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, resfluor::Error> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| resfluor::Error::Parse(e.to_string()))?;
        for f in &m.files {
            if f.path.is_empty() || f.path.starts_with('/') || f.path.split('/').any(|c| c == "..") {
                return Err(resfluor::Error::Parse(format!("file path `{}` must be relative", f.path)));
            }
            if f.sha256.len() != 64 || !f.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(resfluor::Error::Parse(format!("bad sha256 for `{}`", f.path)));
            }
        }
        Ok(m)
    }
}
