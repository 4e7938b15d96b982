//! CSV tables with a header row.

use std::path::Path;

use super::IoError;

/// A CSV table: header names and rows of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Formats a number for a table cell; non-finite values become `nan`, `inf`.
pub fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Column `j` parsed as numbers.
    pub fn column(&self, j: usize) -> Result<Vec<f64>, IoError> {
        self.rows
            .iter()
            .map(|r| {
                r[j].parse::<f64>()
                    .map_err(|_| IoError::Format(format!("cell `{}` is not a number", r[j])))
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, IoError> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| IoError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| IoError::Format(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self, IoError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(csv_err)?;
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv()?).map_err(|source| IoError::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(&text)
    }
}

fn csv_err(e: csv::Error) -> IoError {
    IoError::Format(e.to_string())
}
