//! Seeds and configuration hash attached to every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub seeds: BTreeMap<String, u64>,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(stage: &str, seeds: BTreeMap<String, u64>, config_hash: String) -> Self {
        Self {
            stage: stage.to_string(),
            seeds,
            config_hash,
        }
    }

    /// Single-stage provenance for a standalone subcommand.
    pub fn single(stage: &str, seed: u64, config_hash: String) -> Self {
        Self::new(stage, [(stage.to_string(), seed)].into(), config_hash)
    }

    pub fn for_stage(&self, stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            ..self.clone()
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("provenance serializes")
    }

    /// One-line `key=value` form for CSV and SVG comments.
    pub fn line(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        format!("stage={} seeds={} config_hash={}", self.stage, seeds.join(";"), self.config_hash)
    }

    pub fn csv_comment(&self) -> String {
        format!("# {}\n", self.line())
    }
}

/// SHA-256 over length-prefixed parts, hex encoded.
pub fn hash_parts(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Hash of a serializable value plus the bytes of input files.
pub fn config_hash<T: Serialize>(config: &T, inputs: &[&Path]) -> std::io::Result<String> {
    let json = serde_json::to_vec(config).expect("config serializes");
    let mut blobs = vec![json];
    for p in inputs {
        blobs.push(std::fs::read(p)?);
    }
    let refs: Vec<&[u8]> = blobs.iter().map(Vec::as_slice).collect();
    Ok(hash_parts(&refs))
}

/// Sidecar path for formats without comment syntax.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".provenance.json");
    path.with_file_name(name)
}

pub fn write_sidecar(path: &Path, prov: &Provenance) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(prov).expect("provenance serializes") + "\n";
    std::fs::write(sidecar(path), text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_length_prefixed() {
        assert_ne!(hash_parts(&[b"ab", b"c"]), hash_parts(&[b"a", b"bc"]));
        assert_eq!(hash_parts(&[b"x"]).len(), 64);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar(Path::new("out/trials.jsonl")), PathBuf::from("out/trials.jsonl.provenance.json"));
    }

    #[test]
    fn comment_line() {
        let p = Provenance::new("explore", [("explore".into(), 4), ("generate".into(), 7)].into(), "ab".into());
        assert_eq!(p.csv_comment(), "# stage=explore seeds=explore:4;generate:7 config_hash=ab\n");
    }
}
