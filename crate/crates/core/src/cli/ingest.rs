use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::TobitDataset;

/// A numeric table read from CSV with its header.
pub(crate) struct NumericTable {
    pub names: Vec<String>,
    /// Row-major, `rows × names.len()`.
    pub values: Vec<f64>,
    pub rows: usize,
}

impl NumericTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.names.len() + col]
    }
}

/// Reads a headed CSV in which every cell must be a finite number. Rows in
/// error messages are 1-based data rows (the header is not counted).
pub(crate) fn read_numeric_csv<R: Read>(reader: R, label: &str) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().any(String::is_empty) {
        return Err(Error::Schema(format!("{label}: header has empty column names")));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Ingestion {
            path: label.into(),
            row: rows + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        for (cell, name) in rec.iter().zip(&names) {
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Ingestion {
                path: label.into(),
                row: rows + 1,
                column: name.clone(),
                message: if cell.is_empty() {
                    "missing value".into()
                } else {
                    format!("not a finite number: {cell:?}")
                },
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(NumericTable { names, values, rows })
}

pub(crate) fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Loads a data set: the `response` column is `y`, every other column is a
/// covariate in file order.
pub(crate) fn load_dataset(path: &Path, response: &str, c: f64) -> Result<(Vec<String>, TobitDataset)> {
    let label = path.display().to_string();
    let table = read_numeric_csv(open(path)?, &label)?;
    let yi = table
        .column_index(response)
        .ok_or_else(|| Error::Schema(format!("{label}: no response column {response:?}")))?;
    if table.rows == 0 {
        return Err(Error::domain(format!("{label}: data set has no rows")));
    }
    if table.names.len() < 2 {
        return Err(Error::domain(format!("{label}: no covariate columns besides {response:?}")));
    }
    let cols: Vec<usize> = (0..table.names.len()).filter(|&j| j != yi).collect();
    let x = DMatrix::from_fn(table.rows, cols.len(), |i, k| table.get(i, cols[k]));
    let y = DVector::from_fn(table.rows, |i, _| table.get(i, yi));
    let names = cols.iter().map(|&j| table.names[j].clone()).collect();
    Ok((names, TobitDataset::new(x, y, c)?))
}
