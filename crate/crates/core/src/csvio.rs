//! Numeric CSV matrices in and out.
//!
//! Input: comma-separated, UTF-8, optional header. The first record is a
//! header when any of its cells fails to parse as a number. Output floats use
//! 17 significant digits so values survive a round trip.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// A parsed numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads a numeric table. Row numbers in messages are 1-based file lines.
pub fn read_table<R: Read>(reader: R) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::invalid(format!("CSV row {line}: {e}")))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if idx == 0 && record.iter().any(|c| parse_cell(c).is_none()) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::invalid(format!(
                    "CSV row {line}: expected {w} columns, found {}",
                    record.len()
                )));
            }
        } else {
            width = Some(record.len());
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            match parse_cell(cell) {
                Some(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::invalid(format!(
                        "CSV row {line}, column {}: '{cell}' is not a finite number",
                        j + 1
                    )))
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("CSV contains no numeric rows"));
    }
    let p = rows[0].len();
    let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    Ok(NumericTable { header, values })
}

pub fn read_matrix_path(path: &Path) -> Result<DataMatrix> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    DataMatrix::new(read_table(file)?.values)
}

/// `{:.16e}`: 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes rows of floats, optionally preceded by a header.
pub fn write_matrix<W: Write>(out: W, header: Option<&[&str]>, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::invalid(format!("cannot write CSV: {e}"));
    if let Some(h) = header {
        w.write_record(h).map_err(io)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|v| format_float(*v)))
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("cannot write CSV: {e}")))?;
    Ok(())
}
