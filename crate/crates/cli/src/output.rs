//! Tabular records with deterministic CSV and JSON encodings.
//!
//! Reals are rounded to 10 significant digits before encoding in either
//! format, so re-reading an emitted file and encoding it again reproduces
//! it byte for byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_owned())
    }
}

/// Text form of a real with 10 significant digits; `inf`, `-inf`, `nan`
/// for non-finite values.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.9e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Real(x) => fmt_real(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    /// Non-finite reals become JSON `null`.
    fn json(&self) -> Value {
        match self {
            Cell::Real(x) if x.is_finite() => {
                let rounded: f64 = fmt_real(*x).parse().expect("formatted real parses");
                serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
            }
            Cell::Real(_) => Value::Null,
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

/// Named columns and rows. A table marked `single` is encoded as one JSON
/// object instead of an array.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub single: bool,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            single: false,
        }
    }

    /// One-row table from `(name, value)` pairs.
    pub fn record(fields: Vec<(&str, Cell)>) -> Self {
        let (names, cells): (Vec<_>, Vec<_>) = fields.into_iter().unzip();
        Self {
            columns: names.iter().map(|s| s.to_string()).collect(),
            rows: vec![cells],
            single: true,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn encode(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let err = |e: csv::Error| CliError::Output(e.to_string());
                w.write_record(&self.columns).map_err(err)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(err)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
            }
            Format::Json => {
                let objects: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let map: Map<String, Value> = self
                            .columns
                            .iter()
                            .cloned()
                            .zip(row.iter().map(Cell::json))
                            .collect();
                        Value::Object(map)
                    })
                    .collect();
                let value = if self.single && objects.len() == 1 {
                    objects.into_iter().next().expect("one row")
                } else {
                    Value::Array(objects)
                };
                let mut s = serde_json::to_string_pretty(&value).map_err(|e| CliError::Output(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
        }
    }

    #[cfg(test)]
    /// Parses text produced by [`Table::encode`]. CSV cells are read back
    /// as integers, booleans, reals or text, in that order of preference.
    pub fn decode(text: &str, format: Format) -> Result<Self, CliError> {
        let err = |e: String| CliError::Output(e);
        match format {
            Format::Csv => {
                let mut r = csv::Reader::from_reader(text.as_bytes());
                let columns: Vec<String> = r
                    .headers()
                    .map_err(|e| err(e.to_string()))?
                    .iter()
                    .map(str::to_owned)
                    .collect();
                let mut rows = Vec::new();
                for rec in r.records() {
                    let rec = rec.map_err(|e| err(e.to_string()))?;
                    rows.push(rec.iter().map(parse_csv_cell).collect());
                }
                let single = rows.len() == 1;
                Ok(Self { columns, rows, single })
            }
            Format::Json => {
                let v: Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
                let (objects, single) = match v {
                    Value::Array(a) => (a, false),
                    o @ Value::Object(_) => (vec![o], true),
                    _ => return Err(err("expected an object or array".into())),
                };
                let mut columns: Vec<String> = Vec::new();
                let mut rows = Vec::new();
                for o in objects {
                    let Value::Object(map) = o else {
                        return Err(err("expected objects".into()));
                    };
                    if columns.is_empty() {
                        columns = map.keys().cloned().collect();
                    }
                    rows.push(map.values().map(json_cell).collect());
                }
                Ok(Self { columns, rows, single })
            }
        }
    }
}

#[cfg(test)]
fn parse_csv_cell(s: &str) -> Cell {
    if let Ok(n) = s.parse::<u64>() {
        Cell::Int(n)
    } else if let Ok(b) = s.parse::<bool>() {
        Cell::Bool(b)
    } else if let Ok(x) = s.parse::<f64>() {
        Cell::Real(x)
    } else {
        Cell::Text(s.to_owned())
    }
}

#[cfg(test)]
fn json_cell(v: &Value) -> Cell {
    match v {
        Value::Null => Cell::Real(f64::INFINITY),
        Value::Bool(b) => Cell::Bool(*b),
        Value::Number(n) => match n.as_u64() {
            Some(u) if !n.is_f64() => Cell::Int(u),
            _ => Cell::Real(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => Cell::Text(s.clone()),
        other => Cell::Text(other.to_string()),
    }
}

/// Prints `table` to stdout and, when `out` is given, also writes it to
/// `out/<stem>.<ext>`.
pub fn emit(table: &Table, stem: &str, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = table.encode(format)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.{}", format.extension())), &text)?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["name", "x", "n", "ok"]);
        t.push(vec!["a".into(), 9.64021e-10.into(), 3u64.into(), true.into()]);
        t.push(vec!["b".into(), (1.0 / 3.0).into(), 0u64.into(), false.into()]);
        t.push(vec!["c".into(), 1.007e13.into(), 7u64.into(), false.into()]);
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let text = sample().encode(Format::Csv).unwrap();
        let again = Table::decode(&text, Format::Csv).unwrap().encode(Format::Csv).unwrap();
        assert_eq!(text, again);
        assert!(text.contains("3.333333333e-1"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let text = sample().encode(Format::Json).unwrap();
        let again = Table::decode(&text, Format::Json).unwrap().encode(Format::Json).unwrap();
        assert_eq!(text, again);
        let rec = Table::record(vec![("rate", 1.5e-9.into()), ("clamped", false.into())]);
        let text = rec.encode(Format::Json).unwrap();
        assert!(text.trim_start().starts_with('{'));
        assert_eq!(Table::decode(&text, Format::Json).unwrap().encode(Format::Json).unwrap(), text);
    }

    #[test]
    fn non_finite_values() {
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        let t = Table::record(vec![("plob", f64::INFINITY.into())]);
        assert!(t.encode(Format::Json).unwrap().contains("null"));
        assert!(t.encode(Format::Csv).unwrap().contains("inf"));
    }
}
