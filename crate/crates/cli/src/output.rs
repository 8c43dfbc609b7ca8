//! Tabular output shared by all commands, written as CSV or JSON.

use std::io::Write;

use serde_json::{Map, Value};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone)]
pub enum Field {
    Num(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Num(v) => format!("{v:.9e}"),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
            Field::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Field::Text(s) => Value::String(s.clone()),
            Field::Bool(b) => Value::Bool(*b),
            Field::Empty => Value::Null,
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

impl From<String> for Field {
    fn from(s: String) -> Self {
        Field::Text(s)
    }
}

impl From<bool> for Field {
    fn from(b: bool) -> Self {
        Field::Bool(b)
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Empty, Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct Sheet {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
}

impl Sheet {
    pub fn new(header: Vec<&'static str>) -> Self {
        Sheet { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Field::csv)).map_err(io)?;
                }
                w.flush()?;
            }
            Format::Json => {
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> =
                            self.header.iter().zip(row).map(|(k, v)| (k.to_string(), v.json())).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, &records).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

fn io(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Rejects a value that should be a probability but is not in `[0, 1]`.
pub fn check_probability(v: f64, what: &str) -> Result<f64, CliError> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Core(parisian::Error::Numeric(format!("{what} = {v} is outside [0, 1]"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_ten_significant_digits() {
        let mut s = Sheet::new(vec!["x", "value"]);
        s.push(vec![1.0.into(), 0.2872324151.into()]);
        let mut buf = Vec::new();
        s.write(&mut buf, Format::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,value\n1.000000000e0,2.872324151e-1\n");
    }

    #[test]
    fn json_keeps_column_order() {
        let mut s = Sheet::new(vec!["b", "a"]);
        s.push(vec![Field::Empty, "t".into()]);
        let mut buf = Vec::new();
        s.write(&mut buf, Format::Json).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.find("\"b\"").unwrap() < text.find("\"a\"").unwrap());
    }
}
