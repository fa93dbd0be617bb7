//! Deterministic artifact writing (RFC-4180 CSV, JSON) and CSV re-ingestion.
//!
//! Floats are rendered with a fixed `{:.12e}` format so identical runs
//! produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Fixed float rendering used in every CSV cell.
pub fn fmt(value: f64) -> String {
    format!("{value:.12e}")
}

pub struct CsvWriter {
    lines: Vec<String>,
}

impl CsvWriter {
    /// Header fields are written verbatim; keep them ASCII with unit
    /// annotations in parentheses.
    pub fn new(header: &[&str]) -> Self {
        Self {
            lines: vec![header.join(",")],
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| fmt(v)).collect();
        self.lines.push(cells.join(","));
    }

    pub fn row_cells(&mut self, cells: &[String]) {
        self.lines.push(cells.join(","));
    }

    pub fn content(&self) -> String {
        let mut out = self.lines.join("\r\n");
        out.push_str("\r\n");
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &self.content())
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}

pub fn write_json(path: &Path, json: &str) -> Result<(), CliError> {
    let mut content = json.to_string();
    if !content.ends_with('\n') {
        content.push('\n');
    }
    write_text(path, &content)
}

/// Read a numeric CSV (RFC-4180, '.' decimal, one header row), returning
/// the named columns.
pub fn read_csv_columns(path: &Path, n_columns: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let content = fs::read_to_string(path)?;
    let mut rows = content.lines();
    let header = rows
        .next()
        .ok_or_else(|| CliError::validation(format!("{}: empty CSV", path.display())))?;
    let declared = header.split(',').count();
    if declared < n_columns {
        return Err(CliError::validation(format!(
            "{}: expected at least {n_columns} columns, header has {declared}",
            path.display()
        )));
    }
    let mut columns = vec![Vec::new(); n_columns];
    for (i, line) in rows.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < n_columns {
            return Err(CliError::validation(format!(
                "{}: row {} has {} cells, expected {n_columns}",
                path.display(),
                i + 2,
                cells.len()
            )));
        }
        for (c, column) in columns.iter_mut().enumerate() {
            let value: f64 = cells[c].trim().parse().map_err(|_| {
                CliError::validation(format!(
                    "{}: row {} column {} is not a number: \"{}\"",
                    path.display(),
                    i + 2,
                    c + 1,
                    cells[c]
                ))
            })?;
            column.push(value);
        }
    }
    Ok(columns)
}

/// Output directory resolution: --out flag, then config value, then the
/// ODNMR_OUT environment variable, then ./out.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&str>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = config {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("ODNMR_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("out")
}
