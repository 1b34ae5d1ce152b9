//! Result tables.
//!
//! CSV files start with the schema line `# gcnsbm-table v1`, then a header
//! row with the columns of [`Row`] in declaration order. Empty fields mean
//! "not applicable". Reals are written in shortest round-trip form, so reading
//! a table back gives bit-identical values. JSON output is an array of the
//! same records.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA: &str = "# gcnsbm-table v1";

/// One output record. `kind` is `se`, `bo`, `sim`, `sim-mean`, `rates` or
/// `cstar`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: String,
    pub panel: String,
    pub point: usize,
    pub rep: Option<usize>,
    pub model: String,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub rho_test: f64,
    pub d: String,
    pub n: Option<usize>,
    pub loss: String,
    pub r: Option<f64>,
    pub c: Option<f64>,
    pub acc_test: Option<f64>,
    pub acc_train: Option<f64>,
    pub e_test: Option<f64>,
    pub e_train: Option<f64>,
    pub acc_test_se: Option<f64>,
    pub acc_train_se: Option<f64>,
    pub e_test_se: Option<f64>,
    pub e_train_se: Option<f64>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub converged: Option<bool>,
    pub quantity: String,
    pub value: Option<f64>,
    pub note: String,
    pub failure: String,
}

impl Row {
    pub fn failed(&self) -> bool {
        !self.failure.is_empty()
    }
}

pub fn write_csv<W: Write>(rows: &[Row], mut out: W) -> Result<(), CliError> {
    writeln!(out, "{SCHEMA}")?;
    if rows.is_empty() {
        writeln!(out, "{}", header_line()?)?;
        return Ok(());
    }
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// The CSV header row, taken from the serde field names.
fn header_line() -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    w.serialize(Row::default())?;
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    let text = String::from_utf8_lossy(&bytes);
    Ok(text.lines().next().unwrap_or_default().to_string())
}

pub fn write_json<W: Write>(rows: &[Row], mut out: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>, CliError> {
    let label = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut reader = std::io::BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != SCHEMA {
        return Err(CliError::Table {
            path: label,
            line: 1,
            message: format!("expected schema line `{SCHEMA}`"),
        });
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        rows.push(rec.map_err(|e| CliError::Table {
            path: label.clone(),
            line: i + 3,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}
