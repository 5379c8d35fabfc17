//! Comma-separated tables with a header row.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use aif_core::Dataset;

use crate::error::{CliError, Result};

/// Feature columns of the Pima Indians Diabetes data.
pub const DIABETES_FEATURES: [&str; 8] = [
    "Pregnancies",
    "Glucose",
    "BloodPressure",
    "SkinThickness",
    "Insulin",
    "BMI",
    "DiabetesPedigreeFunction",
    "Age",
];
pub const DIABETES_OUTCOME: &str = "Outcome";

/// A numeric table read from disk.
#[derive(Debug, Clone)]
pub struct Table {
    pub names: Vec<String>,
    pub data: Dataset,
    pub path: PathBuf,
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => {
            let message = match line {
                Some(l) => format!("line {l}: {other:?}"),
                None => format!("{other:?}"),
            };
            CliError::input(path, message)
        }
    }
}

/// Reads a header-bearing numeric table, dropping the columns in `exclude`.
pub fn read_table(path: &Path, exclude: &[String]) -> Result<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(aif_core::Error::EmptyInput.into());
    }
    for name in exclude {
        if !header.iter().any(|h| h == name) {
            return Err(CliError::input(path, format!("no column named {name:?}")));
        }
    }
    let keep: Vec<usize> = (0..header.len())
        .filter(|&j| !exclude.iter().any(|x| x == &header[j]))
        .collect();
    if keep.is_empty() {
        return Err(CliError::input(path, "no feature columns left"));
    }
    let names: Vec<String> = keep.iter().map(|&j| header[j].to_string()).collect();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for &j in &keep {
            let cell = &record[j];
            let v: f64 = cell.parse().map_err(|_| {
                CliError::input(
                    path,
                    format!("line {line}, column {:?}: {cell:?} is not a number", &header[j]),
                )
            })?;
            if !v.is_finite() {
                return Err(CliError::input(
                    path,
                    format!("line {line}, column {:?}: value must be finite", &header[j]),
                ));
            }
            values.push(v);
        }
    }
    let data = Dataset::from_flat(names.len(), values)?;
    Ok(Table {
        names,
        data,
        path: path.to_path_buf(),
    })
}

/// Columns `names` of the table at `path`, in the given order.
pub fn read_columns(path: &Path, names: &[String]) -> Result<Dataset> {
    let table = read_table(path, &[])?;
    let idx = names
        .iter()
        .map(|n| {
            table
                .names
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| CliError::input(path, format!("missing column {n:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = table
        .data
        .rows()
        .flat_map(|r| idx.iter().map(move |&j| r[j]))
        .collect();
    Ok(Dataset::from_flat(names.len(), values)?)
}

/// Reads the Diabetes data: all eight feature columns must be present, the
/// outcome column is dropped when present, and column order follows the file.
pub fn read_diabetes(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let missing: Vec<&str> = DIABETES_FEATURES
        .iter()
        .filter(|f| !header.iter().any(|h| h == *f))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(CliError::input(
            path,
            format!("not a Diabetes table, missing columns: {}", missing.join(", ")),
        ));
    }
    if let Some(extra) = header
        .iter()
        .find(|h| *h != DIABETES_OUTCOME && !DIABETES_FEATURES.contains(&h.as_str()))
    {
        return Err(CliError::input(path, format!("unexpected column {extra:?}")));
    }
    let exclude: Vec<String> = header
        .iter()
        .filter(|h| *h == DIABETES_OUTCOME)
        .cloned()
        .collect();
    read_table(path, &exclude)
}

/// Shortest text that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn numeric_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<String>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(fmt_f64).collect())
        .collect()
}

/// Writes a table to `out`, or to standard output when `out` is `None`.
pub fn write_table<H: AsRef<str>>(out: Option<&Path>, header: &[H], rows: &[Vec<String>]) -> Result<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(io::stdout().lock()),
    };
    let name = out.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    let mut w = csv::Writer::from_writer(sink);
    let result = w
        .write_record(header.iter().map(AsRef::as_ref))
        .and_then(|_| rows.iter().try_for_each(|row| w.write_record(row)))
        .map_err(|e| csv_error(&name, e))
        .and_then(|_| w.flush().map_err(|e| CliError::io(&name, e)));
    match result {
        // reader went away, e.g. piped into `head`
        Err(CliError::Io { source, .. }) if out.is_none() && source.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

pub fn write_numeric<H: AsRef<str>>(out: Option<&Path>, header: &[H], rows: Vec<Vec<f64>>) -> Result<()> {
    write_table(out, header, &numeric_rows(rows))
}
