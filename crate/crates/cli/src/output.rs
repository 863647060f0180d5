//! The single output writer: newline-delimited JSON or one CSV table.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

/// Buffered records of one run, written in emission order by [`Emitter::finish`].
pub struct Emitter {
    format: Format,
    subcommand: &'static str,
    header: Value,
    columns: &'static [&'static str],
    rows: Vec<Vec<String>>,
    records: Vec<Value>,
}

impl Emitter {
    pub fn new(subcommand: &'static str, config: &ExperimentConfig, format: Format, unit: &str, columns: &'static [&'static str]) -> Self {
        let header = json!({
            "record": "config",
            "subcommand": subcommand,
            "unit": unit,
            "declarations": config.declarations,
            "config": config,
        });
        Emitter { format, subcommand, header, columns, rows: Vec::new(), records: Vec::new() }
    }

    /// A JSON record; in CSV mode it is written as a `# record` comment.
    pub fn record(&mut self, kind: &str, body: impl Serialize) -> Result<(), CliError> {
        let mut v = serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))?;
        match &mut v {
            Value::Object(map) => {
                map.insert("record".into(), Value::String(kind.into()));
            }
            other => *other = json!({ "record": kind, "value": other.clone() }),
        }
        self.records.push(v);
        Ok(())
    }

    /// A CSV row for the subcommand's table; ignored in JSON mode.
    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        if self.format == Format::Csv {
            self.rows.push(cells);
        }
    }

    pub fn finish(self, out: &mut dyn Write) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(e.to_string());
        match self.format {
            Format::Json => {
                writeln!(out, "{}", self.header).map_err(io)?;
                for r in &self.records {
                    writeln!(out, "{r}").map_err(io)?;
                }
            }
            Format::Csv => {
                writeln!(out, "# {}", self.header).map_err(io)?;
                for r in self.records.iter().filter(|r| r["record"] != self.table_record()) {
                    writeln!(out, "# {r}").map_err(io)?;
                }
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(self.columns).map_err(|e| CliError::Io(e.to_string()))?;
                for row in &self.rows {
                    w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
                }
                w.flush().map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    /// Records already covered by table rows are not repeated as comments.
    fn table_record(&self) -> &'static str {
        match self.subcommand {
            "strip" => "strip",
            "entropy" => "entropy",
            "skew-check" => "phase",
            "chaos" => "average",
            "tuples" => "neighborhood",
            "selftest" => "check",
            _ => "",
        }
    }
}

/// Display form used in CSV cells.
pub fn num(x: f64) -> String {
    format!("{x}")
}
