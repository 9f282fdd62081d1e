//! Run directories. Every file goes through one [`RunWriter`], which records
//! a SHA-256 checksum per file and closes the run with `metadata.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Pipeline, RunConfig};
use crate::CliError;

pub const METADATA_JSON: &str = "metadata.json";
pub const SCHEMA_JSON: &str = "schema.json";
pub const SUMMARY_TXT: &str = "summary.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileSchema {
    pub description: String,
    /// Column names for CSV files, empty for JSON.
    pub columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub pipeline: Pipeline,
    pub config: RunConfig,
    pub status: String,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    /// Relative path to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub struct RunWriter {
    dir: PathBuf,
    files: BTreeMap<String, String>,
    schema: BTreeMap<String, FileSchema>,
    timings: BTreeMap<String, f64>,
    summary: Vec<String>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("output_dir {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
            schema: BTreeMap::new(),
            timings: BTreeMap::new(),
            summary: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("serializing {rel}: {e}")))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// Register the layout of a file kind for `schema.json`.
    pub fn describe(&mut self, pattern: &str, description: &str, columns: &[&str]) {
        self.schema.insert(
            pattern.to_string(),
            FileSchema {
                description: description.to_string(),
                columns: columns.iter().map(|c| c.to_string()).collect(),
            },
        );
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings
            .insert(label.to_string(), start.elapsed().as_secs_f64());
        out
    }

    /// Write summary, schema and metadata; the metadata records the outcome.
    pub fn finish(
        mut self,
        pipeline: Pipeline,
        config: &RunConfig,
        outcome: &Result<(), CliError>,
    ) -> Result<Metadata, CliError> {
        if let Err(e) = outcome {
            self.summary.push(format!("error: {e}"));
        }
        let mut summary = self.summary.join("\n");
        summary.push('\n');
        self.write_bytes(SUMMARY_TXT, summary.as_bytes())?;
        let schema = std::mem::take(&mut self.schema);
        self.write_json(SCHEMA_JSON, &schema)?;
        let meta = Metadata {
            tool: "breather".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            pipeline,
            config: config.clone(),
            status: if outcome.is_ok() { "ok" } else { "error" }.into(),
            exit_code: outcome.as_ref().err().map_or(0, CliError::exit_code),
            error: outcome.as_ref().err().map(|e| e.to_string()),
            timings: self.timings,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&meta)
            .map_err(|e| CliError::Numerical(format!("serializing metadata: {e}")))?;
        text.push('\n');
        std::fs::write(self.dir.join(METADATA_JSON), text)?;
        Ok(meta)
    }
}

pub fn read_metadata(dir: &Path) -> Option<Metadata> {
    let text = std::fs::read_to_string(dir.join(METADATA_JSON)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Files whose current digest differs from the recorded one (or are gone).
pub fn checksum_mismatches(dir: &Path, meta: &Metadata) -> Vec<String> {
    meta.files
        .iter()
        .filter(|(rel, digest)| match std::fs::read(dir.join(rel)) {
            Ok(bytes) => sha256_hex(&bytes) != **digest,
            Err(_) => true,
        })
        .map(|(rel, _)| rel.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn writer_records_and_detects_changes() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = RunWriter::create(tmp.path()).unwrap();
        w.write_bytes("sub/data.csv", b"x,y\n1,2\n").unwrap();
        w.describe("sub/data.csv", "test data", &["x", "y"]);
        let cfg = RunConfig::parse("", &[]).unwrap();
        let meta = w.finish(Pipeline::Fermi, &cfg, &Ok(())).unwrap();
        assert_eq!(meta.status, "ok");
        let back = read_metadata(tmp.path()).unwrap();
        assert_eq!(back, meta);
        assert!(checksum_mismatches(tmp.path(), &back).is_empty());
        std::fs::write(tmp.path().join("sub/data.csv"), b"x,y\n1,3\n").unwrap();
        assert_eq!(checksum_mismatches(tmp.path(), &back), vec!["sub/data.csv"]);
    }
}
