//! Parameter documents and count CSV files.

use std::fs;
use std::path::Path;

use mpcs_core::{CountMatrix, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// On-disk parameter document: `{"lambda": [...], "omega": [[1], [w21, w22], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    pub lambda: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
}

impl ParamsDoc {
    pub fn from_params(p: &ModelParams) -> Self {
        ParamsDoc {
            lambda: p.lambdas().to_vec(),
            omega: p.weights().to_vec(),
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.lambda.clone(), self.omega.clone())?)
    }
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: ParamsDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: not a parameter document: {e}", path.display())))?;
    doc.to_params()
}

pub fn write_params(path: &Path, p: &ModelParams) -> Result<()> {
    write_json(path, &ParamsDoc::from_params(p))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// A count matrix with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct CountFile {
    pub columns: Vec<String>,
    pub data: CountMatrix,
}

/// Reads a header row of column names followed by rows of base-10 counts.
pub fn read_counts(path: &Path) -> Result<CountFile> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_counts(&bytes).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_counts(bytes: &[u8]) -> Result<CountFile> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::input(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(CliError::input("missing header row"));
    }
    let d = columns.len();
    let mut values = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| CliError::input(format!("row {row}: {e}")))?;
        if rec.len() != d {
            return Err(CliError::input(format!(
                "row {row}: expected {d} fields, found {}",
                rec.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v = field.trim();
            let count = v.parse::<u32>().map_err(|_| {
                CliError::input(format!(
                    "row {row}, column {} ({}): {v:?} is not a nonnegative integer",
                    c + 1,
                    columns[c]
                ))
            })?;
            values.push(count);
        }
    }
    if values.is_empty() {
        return Err(CliError::input("no data rows"));
    }
    Ok(CountFile {
        columns,
        data: CountMatrix::new(d, values)?,
    })
}

/// Default column names `X1..Xd`.
pub fn default_columns(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("X{i}")).collect()
}

pub fn write_counts(path: &Path, columns: &[String], data: &CountMatrix) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(columns).expect("in-memory write");
    for row in data.rows() {
        wtr.write_record(row.iter().map(u32::to_string)).expect("in-memory write");
    }
    let bytes = wtr.into_inner().expect("in-memory flush");
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
