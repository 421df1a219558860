//! CSV tables and their JSON sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::Result;

/// Rows of pre-formatted cells under a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip form, so output is reproducible byte for byte;
/// exponent notation outside `[1e−4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// `results.csv` → `results.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Write the table to `path` (or stdout) and, for a file, the sidecar next
/// to it.
pub fn write_outputs(table: &Table, path: Option<&Path>, sidecar: &Value) -> Result<()> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p)?;
            table.write_csv(std::io::BufWriter::new(file))?;
            let text = serde_json::to_string_pretty(sidecar).expect("JSON values always serialize");
            std::fs::write(sidecar_path(p), text + "\n")?;
        }
        None => table.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}
