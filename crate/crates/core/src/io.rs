//! Text formats: CSV matrices, one-value-per-line vectors, box files and the
//! JSON run manifest.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::boxset::BoxSet;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Other(format!("{}: {e}", path.display())))
}

fn parse_value(tok: &str, lineno: usize) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| {
        Error::Other(format!(
            "line {lineno}: cannot parse {:?} as a number",
            tok.trim()
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Other(format!(
            "line {lineno}: value {v} is not finite"
        )));
    }
    Ok(v)
}

/// One matrix row per line, comma-separated.
pub fn parse_matrix_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| parse_value(t, lineno))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Other(format!(
                    "line {lineno}: expected {} columns, found {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Other("matrix file is empty".into()));
    }
    DenseMatrix::from_rows(&rows)
}

/// One value per line.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_value(l, i + 1))
        .collect()
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_vector(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 24);
    for x in v {
        s.push_str(&fmt_exact(*x));
        s.push('\n');
    }
    s
}

pub fn format_matrix_csv(a: &DenseMatrix) -> String {
    let mut s = String::new();
    for i in 0..a.rows() {
        let row: Vec<String> = a.row(i).iter().map(|v| fmt_exact(*v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Other(format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    with_path(path, parse_matrix_csv(&read(path)?))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    with_path(path, parse_vector(&read(path)?))
}

pub fn read_box(path: &Path) -> Result<BoxSet> {
    with_path(path, BoxSet::parse(&read(path)?))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Other(format!("{}: {e}", path.display())))
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<P: Serialize> {
    pub command: String,
    pub argv: Vec<String>,
    pub version: &'static str,
    pub parameters: P,
}

impl<P: Serialize> RunManifest<P> {
    pub fn new(command: &str, parameters: P) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            parameters,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Other(e.to_string()))
    }
}
