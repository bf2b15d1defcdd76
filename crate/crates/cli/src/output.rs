//! In-memory result tables and their CSV form.
//!
//! Every file starts with a header row. Real numbers are written in
//! shortest round-trip scientific notation, counts as plain integers and
//! missing values as empty fields. Lines end in `\n`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem; the table is written to `<dir>/<name>.csv`.
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    /// Parses column `name` of every row as a float; empty fields give NaN.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: PathBuf::from(format!("{}.csv", self.name)),
            source: e.into_error(),
        })
    }
}

pub fn real(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn count(n: usize) -> String {
    n.to_string()
}

/// Writes each table to `<dir>/<name>.csv`, creating `dir` if needed.
pub fn write_tables(dir: &Path, tables: &[Table]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(tables.len());
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, t.to_csv()?).map_err(|source| CliError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
