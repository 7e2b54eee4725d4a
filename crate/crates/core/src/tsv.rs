//! Minimal tab-separated table reading and float formatting shared by the
//! file formats of every stage.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    /// (1-based line number, cells)
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&path.display().to_string(), &text)
    }

    pub fn parse(file: &str, text: &str) -> Result<Table> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| Error::Format { file: file.to_string(), line: 1, message: "empty file".into() })?;
        let header: Vec<String> = head.split('\t').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (line, l) in lines {
            let cells: Vec<String> = l.split('\t').map(|s| s.trim().to_string()).collect();
            if cells.len() != header.len() {
                return Err(Error::Format { file: file.to_string(), line, message: format!("expected {} columns, found {}", header.len(), cells.len()) });
            }
            rows.push((line, cells));
        }
        Ok(Table { file: file.to_string(), header, rows })
    }

    pub fn expect_header_prefix(&self, first: &str) -> Result<()> {
        if self.header.first().map(String::as_str) != Some(first) {
            return Err(Error::Format { file: self.file.clone(), line: 1, message: format!("first header column must be {first:?}") });
        }
        Ok(())
    }

    pub fn number(&self, line: usize, col: usize, cell: &str) -> Result<f64> {
        parse_number(&self.file, line, &self.header[col], cell)
    }
}

pub fn parse_number(file: &str, line: usize, column: &str, cell: &str) -> Result<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Err(Error::MissingValue { file: file.to_string(), line, column: column.to_string() });
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumericCell { file: file.to_string(), line, column: column.to_string(), value: cell.to_string() }),
    }
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Shortest decimal representation that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}
