//! Tables (CSV with one header row, or JSON) and the metadata sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::Format;
use crate::error::CliError;

/// Column-ordered table. Cells are numbers, strings or null (empty in CSV).
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

pub fn num(v: f64) -> Value {
    // non-finite values have no JSON form
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn write(&self, format: Format, w: impl Write) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                let mut out = csv::Writer::from_writer(w);
                out.write_record(&self.columns)?;
                for r in &self.rows {
                    out.write_record(r.iter().map(cell))?;
                }
                out.flush()?;
            }
            Format::Json => {
                let mut w = w;
                serde_json::to_writer(&mut w, &json!({ "columns": self.columns, "rows": self.rows }))?;
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// `run.csv` -> `run.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

/// Write `body` to `out` (stdout when `None`) and the sidecar next to it.
pub fn emit(
    out: Option<&Path>,
    meta: &Value,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            body(&mut f)?;
            f.flush()?;
            let mut s = serde_json::to_string_pretty(meta)?;
            s.push('\n');
            std::fs::write(sidecar_path(path), s)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
        }
    }
    Ok(())
}
