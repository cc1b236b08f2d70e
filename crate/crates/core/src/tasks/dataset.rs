use std::path::Path;

use crate::error::{Error, Result};

/// A dense n×d table of observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    integral: bool,
}

fn is_count(v: f64) -> bool {
    v >= 0.0 && v.fract() == 0.0 && v.is_finite()
}

impl Dataset {
    /// `integral` marks count data; every entry must then be a nonnegative integer.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, integral: bool) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(format!("{} values for a {rows}x{cols} dataset", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dataset entry at row {}", i / cols.max(1))));
        }
        if integral {
            if let Some(i) = values.iter().position(|v| !is_count(*v)) {
                return Err(Error::Integrality { line: i / cols.max(1) + 1, value: values[i] });
            }
        }
        Ok(Dataset { rows, cols, values, integral })
    }

    pub fn from_rows(rows: &[Vec<f64>], integral: bool) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::shape(format!("row {i} has {} columns, expected {cols}", rows[i].len())));
        }
        Dataset::new(rows.len(), cols, rows.concat(), integral)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_integral(&self) -> bool {
        self.integral
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Column maximum, used by the mixture initialization.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Parses comma-separated decimal rows. Line numbers in errors are 1-based
    /// and count the header.
    pub fn parse_csv(text: &str, header: bool, counts: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut values = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(rows + 1, |p| p.line() as usize);
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            match cols {
                None => cols = Some(record.len()),
                Some(c) if c != record.len() => {
                    return Err(Error::Parse { line, message: format!("expected {c} fields, found {}", record.len()) });
                }
                _ => {}
            }
            for field in record.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("'{field}' is not a number") })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, message: format!("'{field}' is not finite") });
                }
                if counts && !is_count(v) {
                    return Err(Error::Integrality { line, value: v });
                }
                values.push(v);
            }
            rows += 1;
        }
        Dataset::new(rows, cols.unwrap_or(0), values, counts)
    }

    pub fn load_csv(path: &Path, header: bool, counts: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Dataset::parse_csv(&text, header, counts)
    }

    /// Shortest round-trip decimal form of every value, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.iter_rows() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
