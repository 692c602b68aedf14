use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn of(path: &str, data: &[u8]) -> Self {
        FileEntry { path: path.to_string(), sha256: sha256_hex(data), bytes: data.len() as u64 }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// The configuration with every default filled in.
    pub config: RunConfig,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub conventions: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn from_json_str(s: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let m: Manifest = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Schema { path: format!("manifest.{}", e.path()), message: e.inner().to_string() })?;
        for f in &m.files {
            let ok_name = !f.path.is_empty() && !f.path.contains(['/', '\\']) && f.path != "." && f.path != "..";
            if !ok_name {
                return Err(CliError::Schema {
                    path: "manifest.files".into(),
                    message: format!("bad file name `{}`", f.path),
                });
            }
            if f.sha256.len() != 64 || !f.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(CliError::Schema {
                    path: "manifest.files".into(),
                    message: format!("bad digest for `{}`", f.path),
                });
            }
        }
        Ok(m)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn round_trip_and_rejection() {
        let m = Manifest {
            tool: "wrk".into(),
            version: "0.1.0".into(),
            command: Command::Equilibria,
            config: RunConfig::default(),
            seed: 3,
            threads: 1,
            wall_time_s: 0.5,
            conventions: vec![],
            files: vec![FileEntry::of("report.json", b"{}")],
        };
        assert_eq!(Manifest::from_json_str(&m.to_json_pretty()).unwrap(), m);
        let mut bad = m.clone();
        bad.files[0].path = "../x".into();
        assert!(Manifest::from_json_str(&bad.to_json_pretty()).is_err());
    }
}
