//! CSV tables and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha1::{Digest, Sha1};

use crate::error::{McpError, Result};

/// RFC-4180 CSV with a single header row taken from the record fields.
pub fn to_csv<R: Serialize>(records: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| McpError::Encode(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| McpError::Encode(format!("csv: {e}")))
}

/// Hash git assigns to a blob with these contents.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub git_sha1: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Criterion { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputDigest>,
    pub summary: serde_json::Value,
    pub criteria: Vec<Criterion>,
    pub passed: bool,
}

impl RunManifest {
    pub fn new<C: Serialize, S: Serialize>(
        command: &str,
        config: &C,
        summary: &S,
        criteria: Vec<Criterion>,
    ) -> Result<Self> {
        let json = |v: serde_json::Result<serde_json::Value>| v.map_err(|e| McpError::Encode(format!("json: {e}")));
        Ok(RunManifest {
            tool: "mcp",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config: json(serde_json::to_value(config))?,
            outputs: Vec::new(),
            summary: json(serde_json::to_value(summary))?,
            passed: criteria.iter().all(|c| c.pass),
            criteria,
        })
    }

    /// Writes `bytes` to `path` and records its digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, bytes)?;
        self.outputs.push(OutputDigest {
            path: path.to_path_buf(),
            bytes: bytes.len() as u64,
            git_sha1: git_blob_sha1(bytes),
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| McpError::Encode(format!("json: {e}")))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Manifest path next to a CSV output.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}
