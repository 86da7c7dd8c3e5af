//! CSV plumbing shared by the per-module trace formats.
//!
//! Numbers are written with Rust's shortest round-trip `Display`, so a value
//! read back parses to the same bits and reruns produce identical files.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn write_table<W, I, R>(writer: W, header: &[String], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// A CSV file whose every cell is a number.
#[derive(Clone, Debug)]
pub struct NumericTable {
    pub source: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: Read>(reader: R, source: impl Into<PathBuf>) -> Result<Self> {
        let source = source.into();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            // row numbers count the header as row 1, like a spreadsheet
            let row = i + 2;
            let record = record.map_err(|e| Error::Load {
                path: source.clone(),
                row,
                column: String::new(),
                message: e.to_string(),
            })?;
            let mut values = Vec::with_capacity(header.len());
            for (cell, column) in record.iter().zip(&header) {
                let value = cell.parse::<f64>().map_err(|_| Error::Load {
                    path: source.clone(),
                    row,
                    column: column.clone(),
                    message: format!("not a number: {cell:?}"),
                })?;
                values.push(value);
            }
            rows.push(values);
        }
        Ok(Self {
            source,
            header,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn require_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name).ok_or_else(|| Error::Load {
            path: self.source.clone(),
            row: 1,
            column: name.to_string(),
            message: "missing column".to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let text = "t,y\n1,0.5\n2,abc\n";
        let err = NumericTable::from_reader(text.as_bytes(), "series.csv").unwrap_err();
        match err {
            Error::Load { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
