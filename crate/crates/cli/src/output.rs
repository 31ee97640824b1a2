//! Task results and their CSV / JSON rendering.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::Format;

/// A CSV-shaped table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal, with `inf`/`-inf`/`nan` spelled out.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Result of a task: always a JSON document, sometimes also a table.
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    /// Format used when none is requested.
    pub default_format: Format,
}

impl Report {
    pub fn json<T: Serialize>(value: &T) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_value(value)?,
            table: None,
            default_format: Format::Json,
        })
    }

    pub fn with_table<T: Serialize>(value: &T, table: Table) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_value(value)?,
            table: Some(table),
            default_format: Format::Csv,
        })
    }

    /// Table-first report whose JSON form is the matrix view.
    pub fn prefer_json(mut self) -> Self {
        self.default_format = Format::Json;
        self
    }

    pub fn render(&self, format: Option<Format>) -> Result<Vec<u8>> {
        match format.unwrap_or(self.default_format) {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(&self.json)?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => {
                let Some(table) = &self.table else {
                    bail!("this task has no CSV form; use --format json")
                };
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&table.headers)?;
                for row in &table.rows {
                    w.write_record(row)?;
                }
                Ok(w.into_inner().context("flushing CSV")?)
            }
        }
    }

    pub fn write(&self, format: Option<Format>, out: Option<&Path>) -> Result<()> {
        let bytes = self.render(format)?;
        match out {
            Some(path) => {
                std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(&bytes)?;
                Ok(stdout.flush()?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rendering() {
        let mut t = Table::new(["L", "k", "I_L_k"]);
        t.push(vec!["1".into(), "0".into(), num(0.25)]);
        t.push(vec!["3".into(), "1".into(), num(f64::INFINITY)]);
        let r = Report::with_table(&serde_json::json!({}), t).unwrap();
        assert_eq!(
            String::from_utf8(r.render(None).unwrap()).unwrap(),
            "L,k,I_L_k\n1,0,0.25\n3,1,inf\n"
        );
        let j = Report::json(&serde_json::json!({"a": 1})).unwrap();
        assert!(j.render(Some(Format::Csv)).is_err());
    }
}
