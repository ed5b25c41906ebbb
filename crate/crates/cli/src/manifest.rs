use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError};

/// Provenance record written with every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON of `options`.
    pub config_hash: String,
    /// SHA-256 of each input, keyed by file name.
    pub inputs: BTreeMap<String, String>,
    /// Seconds since the Unix epoch, only with `--stamp` so that outputs
    /// stay byte-identical by default.
    pub timestamp: Option<u64>,
    pub options: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, options: serde_json::Value, stamp: bool) -> Self {
        let canonical = serde_json::to_vec(&options).expect("options serialize");
        let timestamp = stamp.then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
        });
        RunManifest {
            tool: "odflow".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: sha256_hex(&canonical),
            inputs: BTreeMap::new(),
            timestamp,
            options,
        }
    }

    pub fn add_input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn add_file(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.add_input(&name, &bytes);
        Ok(())
    }

    /// Writes the manifest next to `output` as `<output>.manifest.json`.
    pub fn write_beside(&self, output: &Path) -> Result<(), CliError> {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        write_json(&output.with_file_name(name), self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_and_determinism() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let a = RunManifest::new("run", serde_json::json!({"lambda": 1.0}), false);
        let b = RunManifest::new("run", serde_json::json!({"lambda": 1.0}), false);
        assert_eq!(a, b);
        assert!(a.timestamp.is_none());
        assert!(RunManifest::new("run", serde_json::json!({}), true).timestamp.is_some());
    }
}
