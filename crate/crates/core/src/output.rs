//! CSV tables and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const CSV_SCHEMA: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::State(format!("csv buffer: {e}")))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    /// Relative to the manifest.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub csv_schema_version: u32,
    pub artifact_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputEntry>,
    pub summary: serde_json::Value,
}

/// Output directory that records every file it writes.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<OutputEntry>,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            outputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<PathBuf> {
        let bytes = table.to_bytes()?;
        let path = self.root.join(name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(OutputEntry {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len(),
            columns: table.header().to_vec(),
        });
        Ok(path)
    }

    pub fn outputs(&self) -> &[OutputEntry] {
        &self.outputs
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(
        self,
        command: &str,
        config: BTreeMap<String, String>,
        seed: Option<u64>,
        wall_time_s: f64,
        summary: serde_json::Value,
    ) -> Result<PathBuf> {
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA,
            csv_schema_version: CSV_SCHEMA,
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            config,
            seed,
            wall_time_s,
            outputs: self.outputs,
            summary,
        };
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
