use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: String,
    pub params: Value,
    pub results: Value,
    pub aggregate: Value,
    /// Excluded from determinism comparisons.
    pub wall_time_s: f64,
}

impl Report {
    pub fn new(command: &str, params: impl Serialize, results: impl Serialize, aggregate: Value, start: Instant) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            params: serde_json::to_value(params)?,
            results: serde_json::to_value(results)?,
            aggregate,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    pub fn to_string_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt(x: Option<usize>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}
