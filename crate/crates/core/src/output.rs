//! Run directory artifacts: CSV tables, JSON summaries and binary field dumps.
//! Every file is created once; an existing file is never overwritten.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::Result;
use crate::fmt_f64;
use crate::grid::Grid;

#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(OutputDir {
            root: root.as_ref().to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    /// Writes a new file; fails if it already exists.
    pub fn write_once(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)?;
        f.write_all(bytes)?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        text.push('\n');
        self.write_once(name, text.as_bytes())
    }
}

/// A CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

pub fn csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub const SCAN_HEADER: [&str; 7] = [
    "lambda",
    "chi_minus_exact",
    "chi_minus_asym",
    "g",
    "condition_I",
    "condition_II",
    "kind",
];

pub const BRANCH_HEADER: [&str; 6] = ["lambda", "xi", "u_l2", "residual", "iters", "status"];

/// Header (rows, cols as u32, h and λ as f64) followed by the row-major values, all
/// little-endian.
pub fn field_bytes(grid: &Grid, lambda: f64, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), grid.node_count());
    let mut out = Vec::with_capacity(24 + 8 * values.len());
    out.extend_from_slice(&(grid.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.cols() as u32).to_le_bytes());
    out.extend_from_slice(&grid.h().to_le_bytes());
    out.extend_from_slice(&lambda.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`field_bytes`]: (rows, cols, h, λ, values).
pub fn read_field(bytes: &[u8]) -> Option<(usize, usize, f64, f64, Vec<f64>)> {
    if bytes.len() < 24 || !(bytes.len() - 24).is_multiple_of(8) {
        return None;
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().ok()?) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().ok()?) as usize;
    let h = f64::from_le_bytes(bytes[8..16].try_into().ok()?);
    let lambda = f64::from_le_bytes(bytes[16..24].try_into().ok()?);
    let values: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    (values.len() == rows * cols).then_some((rows, cols, h, lambda, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_only_when_needed() {
        let text = csv(
            &["a", "b", "c"],
            &[vec![Cell::Num(0.1), Cell::Text("x, y".into()), Cell::Empty]],
        );
        assert_eq!(text, "a,b,c\n1.0000000000000001e-1,\"x, y\",\n");
    }

    #[test]
    fn field_dump_round_trip() {
        let g = Grid::new(1.0, 2.0, 8, 16).unwrap();
        let v: Vec<f64> = (0..g.node_count()).map(|k| k as f64 * 0.5).collect();
        let bytes = field_bytes(&g, 3.25, &v);
        let (rows, cols, h, lambda, back) = read_field(&bytes).unwrap();
        assert_eq!((rows, cols), (17, 9));
        assert_eq!(h, 0.125);
        assert_eq!(lambda, 3.25);
        assert_eq!(back, v);
    }

    #[test]
    fn files_are_write_once() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        out.write_once("a.txt", b"one").unwrap();
        assert!(out.write_once("a.txt", b"two").is_err());
        assert_eq!(fs::read(out.path("a.txt")).unwrap(), b"one");
    }
}
