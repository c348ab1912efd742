//! Artifact writers: CSV tables, JSON reports, and the per-run manifest.
//!
//! CSV files are fully deterministic for a given (config, seed, version):
//! floats are printed with a fixed scientific format and rows are emitted in
//! grid order. Timing and other run-dependent diagnostics go into the
//! manifest, never into the CSV files themselves.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::CliError;

/// Fixed float format used in every CSV cell.
pub fn format_float(x: f64) -> String {
    format!("{x:.10e}")
}

/// A CSV table assembled in memory and written in one pass.
#[derive(Debug, Clone)]
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

    /// Appends a pre-formatted row; must match the header width.
    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width {} does not match header width {}",
            row.len(),
            self.header.len()
        );
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = String::new();
        text.push_str(&self.header.join(","));
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_atomic(path, text.as_bytes())
    }
}

/// Serializes a report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    file.write_all(bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Run-level manifest sidecar describing how the artifacts were produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub label: String,
    /// Package version the artifacts were produced with.
    pub version: String,
    pub seed: u64,
    /// Thread count requested; 0 means the runtime default.
    pub threads: usize,
    pub streaming: bool,
    pub wall_time_seconds: f64,
    /// File names of the artifacts written next to this manifest.
    pub artifacts: Vec<String>,
    /// Numeric health indicators, e.g. trace drift of the channel sums.
    pub diagnostics: BTreeMap<String, f64>,
    /// Full configuration the run resolved to, overrides applied.
    pub config: ScenarioConfig,
}

/// Collects artifacts for one scenario run and writes the manifest last.
pub struct ArtifactSet {
    out_dir: PathBuf,
    label: String,
    written: Vec<PathBuf>,
    diagnostics: BTreeMap<String, f64>,
    started: std::time::Instant,
}

impl ArtifactSet {
    pub fn new(out_dir: &Path, label: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir).map_err(|e| {
            CliError::Io(format!(
                "cannot create output directory {}: {e}",
                out_dir.display()
            ))
        })?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            label: label.to_string(),
            written: Vec::new(),
            diagnostics: BTreeMap::new(),
            started: std::time::Instant::now(),
        })
    }

    /// Path of an artifact named `<label>_<suffix>`.
    pub fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}_{suffix}", self.label))
    }

    pub fn write_csv(&mut self, suffix: &str, table: &CsvTable) -> Result<(), CliError> {
        let path = self.path(suffix);
        table.write(&path)?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(suffix);
        write_json(&path, value)?;
        self.written.push(path);
        Ok(())
    }

    /// Records a numeric diagnostic for the manifest.
    pub fn record(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }

    /// Writes `<label>_manifest.json` and returns all paths written.
    pub fn finish(
        mut self,
        scenario: &str,
        config: &ScenarioConfig,
    ) -> Result<Vec<PathBuf>, CliError> {
        let manifest = RunManifest {
            scenario: scenario.to_string(),
            label: self.label.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.run.seed,
            threads: config.run.threads,
            streaming: config.run.streaming,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            artifacts: self
                .written
                .iter()
                .filter_map(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .collect(),
            diagnostics: self.diagnostics.clone(),
            config: config.clone(),
        };
        let path = self.out_dir.join(format!("{}_manifest.json", self.label));
        write_json(&path, &manifest)?;
        self.written.push(path);
        Ok(self.written)
    }
}
