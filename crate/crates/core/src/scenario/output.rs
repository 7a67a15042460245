use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("table `{table}` row {row} has {got} cells, header has {want}")]
    RowWidth { table: String, row: usize, got: usize, want: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Fixed-point cell, `decimals` places. Non-finite values become `nan`/`inf`.
pub fn fixed(x: f64, decimals: usize) -> String {
    if x.is_finite() {
        let s = format!("{x:.decimals$}");
        // no negative zero in output
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    } else {
        x.to_string().to_lowercase()
    }
}

/// Scientific cell with `digits` after the point.
pub fn sci(x: f64, digits: usize) -> String {
    if x.is_finite() {
        format!("{x:.digits$e}")
    } else {
        x.to_string().to_lowercase()
    }
}

/// A CSV table with a fixed column order; cells are preformatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, headers: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    /// Data rows, for CSV files.
    pub rows: Option<usize>,
}

/// Provenance of one run. Deterministic: no wall-clock fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub scenario_path: Option<String>,
    pub scenario_sha256: Option<String>,
    pub defaults_applied: Vec<String>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory for one command. `manifest.json` goes in last, so its
/// presence marks a complete bundle.
#[derive(Debug)]
pub struct ResultBundle {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl ResultBundle {
    pub fn create(dir: &Path) -> Result<Self, OutputError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let stale = dir.join("manifest.json");
        if stale.exists() {
            fs::remove_file(&stale).map_err(io_err(&stale))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn put(&mut self, name: &str, bytes: &[u8], rows: Option<usize>) -> Result<PathBuf, OutputError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(bytes).map_err(io_err(&path))?;
        f.sync_all().map_err(io_err(&path))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            rows,
        });
        Ok(path)
    }

    /// Write `table` as CSV. An empty table still gets its header row.
    pub fn write_table(&mut self, table: &Table) -> Result<PathBuf, OutputError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let path = self.dir.join(table.file_name());
        let csv_err = |e: csv::Error| OutputError::Io {
            path: path.display().to_string(),
            source: e.into(),
        };
        w.write_record(&table.headers).map_err(csv_err)?;
        for (i, row) in table.rows.iter().enumerate() {
            if row.len() != table.headers.len() {
                return Err(OutputError::RowWidth {
                    table: table.name.clone(),
                    row: i,
                    got: row.len(),
                    want: table.headers.len(),
                });
            }
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| OutputError::Io {
            path: path.display().to_string(),
            source: e.into_error(),
        })?;
        self.put(&table.file_name(), &bytes, Some(table.rows.len()))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, OutputError> {
        self.put(name, text.as_bytes(), None)
    }

    /// Seal the bundle: writes `manifest.json` listing every file so far.
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf, OutputError> {
        manifest.files = self.files;
        let path = self.dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        json.push('\n');
        fs::write(&path, json).map_err(io_err(&path))?;
        Ok(path)
    }
}
