//! CSV input and output.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use gpsurrogate_core::{Matrix, PredictionResult, TrainingSet};

use crate::error::CliError;

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Io(path.display().to_string(), e))?;
    if text.trim().is_empty() {
        return Ok(Table {
            headers: Vec::new(),
            rows: Vec::new(),
        });
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    for (k, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(CliError::Data(format!("{}: column {} has an empty name", path.display(), k + 1)));
        }
        if headers[..k].contains(h) {
            return Err(CliError::Data(format!("{}: duplicate column `{h}`", path.display())));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(k, field)| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Data(format!(
                        "{}: row {}, column `{}`: `{field}` is not a number",
                        path.display(),
                        line + 1,
                        headers[k]
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

/// Reads a learning sample. The output column defaults to the last one; all
/// other columns are inputs.
pub fn read_training_set(path: &Path, output_col: Option<&str>) -> Result<TrainingSet, CliError> {
    let table = read_table(path)?;
    if table.headers.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need a header with at least one input and one output column",
            path.display()
        )));
    }
    let out = match output_col {
        Some(name) => table
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: no column named `{name}`", path.display())))?,
        None => table.headers.len() - 1,
    };
    let inputs: Vec<usize> = (0..table.headers.len()).filter(|&k| k != out).collect();
    let names = inputs.iter().map(|&k| table.headers[k].clone()).collect();
    let x: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| inputs.iter().map(|&k| r[k]).collect())
        .collect();
    let y = table.rows.iter().map(|r| r[out]).collect();
    let x = if x.is_empty() {
        Matrix::zeros(0, inputs.len())
    } else {
        Matrix::from_rows(&x)?
    };
    Ok(TrainingSet::new(x, y, names)?)
}

/// Reads the columns `names` (in that order) of a query file; other columns
/// are ignored. An empty file, or one with a header only, yields zero rows.
pub fn read_query(path: &Path, names: &[String]) -> Result<Matrix, CliError> {
    let table = read_table(path)?;
    if table.headers.is_empty() {
        return Ok(Matrix::zeros(0, names.len()));
    }
    let cols = names
        .iter()
        .map(|n| {
            table
                .headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| CliError::Data(format!("{}: missing input column `{n}`", path.display())))
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let mut m = Matrix::zeros(table.rows.len(), names.len());
    for (i, r) in table.rows.iter().enumerate() {
        for (j, &k) in cols.iter().enumerate() {
            m[(i, j)] = r[k];
        }
    }
    Ok(m)
}

pub fn write_predictions<W: Write>(out: W, preds: &[PredictionResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mean", "mse", "lo95", "hi95"])?;
    for p in preds {
        let (lo, hi) = p.interval95();
        w.write_record([p.mean, p.mse, lo, hi].iter().map(|v| v.to_string()))?;
    }
    w.flush()
}

/// Writes `contents` to `path`, or to stdout when `path` is `-`.
pub fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    if path == Path::new("-") {
        io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Io("stdout".into(), e))
    } else {
        std::fs::write(path, contents).map_err(|e| CliError::Io(path.display().to_string(), e))
    }
}
