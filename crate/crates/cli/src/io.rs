//! File formats the command line reads and writes.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;
use xai_core::data::{make_tabular, make_timeseries, TabularBatch, TabularSchema, TimeseriesWindow};
use xai_core::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

/// Writes to `out` or, without one, to stdout.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// An inline JSON object or the path of a JSON file.
pub fn json_arg(arg: Option<&str>) -> Result<Value> {
    let Some(arg) = arg else {
        return Ok(Value::Object(Default::default()));
    };
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { read_text(Path::new(arg))? };
    let v: Value =
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("--params is not valid JSON: {e}")))?;
    if !v.is_object() {
        return Err(Error::InvalidArgument("--params must be a JSON object".into()));
    }
    Ok(v)
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Loads a table, matching CSV columns to the schema by name. A missing
/// target column is read as all-missing so that instance files need not
/// carry labels.
pub fn read_table(path: &Path, schema: &TabularSchema) -> Result<TabularBatch> {
    let (header, rows) = read_csv(path)?;
    let mut source = Vec::with_capacity(schema.len());
    for col in schema.columns() {
        match header.iter().position(|h| *h == col.name) {
            Some(i) => source.push(Some(i)),
            None if schema.target() == Some(col.name.as_str()) => source.push(None),
            None => {
                return Err(Error::Schema(format!("{}: no column `{}`", path.display(), col.name)));
            }
        }
    }
    let mut cells = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Data(format!(
                "{}: record {} has {} fields, header has {}",
                path.display(),
                r + 1,
                row.len(),
                header.len()
            )));
        }
        cells.push(source.iter().map(|s| s.map(|i| row[i].clone()).unwrap_or_default()).collect());
    }
    make_tabular(schema.clone(), &cells)
}

pub fn read_schema(path: &Path) -> Result<TabularSchema> {
    read_json(path)
}

/// A `timestamp,value` series. Timestamps are integers (e.g. epoch seconds).
pub fn read_series(path: &Path) -> Result<TimeseriesWindow> {
    let (header, rows) = read_csv(path)?;
    if header.len() != 2 {
        return Err(Error::Data(format!("{}: expected two columns timestamp,value", path.display())));
    }
    let mut ts = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let bad = |what: &str| Error::Data(format!("{}: record {}: bad {what}", path.display(), r + 1));
        ts.push(row[0].trim().parse::<i64>().map_err(|_| bad("timestamp"))?);
        values.push(row[1].trim().parse::<f64>().map_err(|_| bad("value"))?);
    }
    make_timeseries(ts, values, header[1].clone())
}
