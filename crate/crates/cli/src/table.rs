//! Comma-separated tables with canonical number formatting.
//!
//! Reals are written as `{:.16e}` (17 significant digits, enough to round-trip
//! any `f64`), integers in decimal, absent values as empty cells. Cells never
//! contain commas or newlines, so parsing is a plain split and re-emitting a
//! parsed table reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Canonical text for a real number.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// `;`-joined list, used for bond profiles and weight lists inside one cell.
pub fn list<T, F: Fn(&T) -> String>(items: &[T], f: F) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<(), CliError> {
        if row.len() != self.header.len() {
            return Err(CliError::Table(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        if let Some(bad) = row.iter().find(|c| c.contains([',', '\n', '\r'])) {
            return Err(CliError::Table(format!("cell {bad:?} contains a separator")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Table(format!("missing column {name}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Table("empty table".into()))?;
        let mut table = Self::new(&header.split(',').collect::<Vec<_>>());
        for line in lines {
            table.push(line.split(',').map(str::to_string).collect())?;
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        crate::write_file(path, self.to_csv().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

/// Typed access to one parsed cell.
pub fn parse_cell<T: std::str::FromStr>(cell: &str, what: &str) -> Result<T, CliError> {
    cell.parse()
        .map_err(|_| CliError::Table(format!("cannot parse {what} from {cell:?}")))
}

pub fn parse_opt_real(cell: &str) -> Result<Option<f64>, CliError> {
    if cell.is_empty() {
        Ok(None)
    } else {
        parse_cell(cell, "real").map(Some)
    }
}

pub fn parse_list<T: std::str::FromStr>(cell: &str, what: &str) -> Result<Vec<T>, CliError> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(';').map(|c| parse_cell(c, what)).collect()
}
