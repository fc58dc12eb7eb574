//! Output files. Every run writes `manifest.json`; every other file embeds
//! the SHA-256 of the manifest body so it can be traced to its inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

pub struct Writer {
    dir: PathBuf,
    hash: String,
}

/// 17 significant digits: round-trips every f64.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Empty field for an undefined value.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Writer {
    /// Creates `dir` and writes the manifest for `body`, which holds no
    /// timestamps or host details so identical runs hash identically.
    pub fn create(dir: &Path, body: Value) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let canonical = serde_json::to_string(&body).expect("JSON values serialize");
        let hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));
        let writer = Self {
            dir: dir.to_path_buf(),
            hash,
        };
        writer.write(MANIFEST, &json!({ "manifest_sha256": writer.hash, "manifest": body }))?;
        Ok(writer)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// A `# manifest_sha256=...` line, then the header and rows.
    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf, CliError> {
        let mut text = format!("# manifest_sha256={}\n{}\n", self.hash, header.join(","));
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    /// `value` (an object) with a `manifest_sha256` member added.
    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut value = serde_json::to_value(value).expect("outputs serialize");
        match &mut value {
            Value::Object(map) => {
                map.insert("manifest_sha256".into(), Value::String(self.hash.clone()));
            }
            other => *other = json!({ "manifest_sha256": self.hash, "data": other.take() }),
        }
        self.write(name, &value)
    }

    fn write(&self, name: &str, value: &Value) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn files_carry_the_manifest_hash() {
        let dir = tempfile::tempdir().unwrap();
        let w = Writer::create(dir.path(), json!({ "command": "x" })).unwrap();
        assert_eq!(w.hash().len(), 64);
        let csv = fs::read_to_string(w.csv("a.csv", &["x"], [vec![num(1.0)]]).unwrap()).unwrap();
        assert!(csv.starts_with(&format!("# manifest_sha256={}\nx\n", w.hash())));
        let j: Value = serde_json::from_str(&fs::read_to_string(w.json("a.json", &json!({ "k": 1 })).unwrap()).unwrap()).unwrap();
        assert_eq!(j["manifest_sha256"], w.hash());
        let m: Value = serde_json::from_str(&fs::read_to_string(w.path(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m["manifest_sha256"], w.hash());
    }
}
