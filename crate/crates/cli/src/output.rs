//! CSV and JSON emission.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// One CSV field. Reals are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        // normalise −0 so equal values print identically
        format!("{:.16e}", if v == 0.0 { 0.0 } else { v })
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(v) => real(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// A header row plus data rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to the file when given, else to stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => {
            let mut h = std::io::stdout().lock();
            h.write_all(text.as_bytes()).and_then(|_| h.flush()).map_err(|e| CliError::Output(e.to_string()))
        }
    }
}
