//! CSV artifacts and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Flag(bool),
    Text(String),
}

impl Cell {
    /// Reals get 17 significant digits so they round-trip exactly.
    pub fn render(&self) -> String {
        match self {
            Cell::Real(v) => format_real(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Flag(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// An in-memory table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a run leaves behind besides its CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub task: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub files: Vec<String>,
    /// Extra `key=value` facts a task wants on record.
    pub facts: Vec<(String, String)>,
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CONFIG_COPY: &str = "config.ini";

impl Manifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("task={}\n", self.task));
        out.push_str(&format!("config_sha256={}\n", self.config_sha256));
        match self.seed {
            Some(s) => out.push_str(&format!("seed={s}\n")),
            None => out.push_str("seed=none\n"),
        }
        out.push_str(&format!("voljump_version={}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("files={}\n", self.files.join(",")));
        for (k, v) in &self.facts {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.render()).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Parses `key=value` lines of a manifest.
pub fn read_manifest(dir: &Path) -> Result<Vec<(String, String)>> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_uses_lf_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["x", "ok"]);
        t.push(vec![0.5.into(), true.into()]);
        let path = dir.path().join("t.csv");
        t.write(&path).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text, "x,ok\n5.0000000000000000e-1,true\n");
    }
}
