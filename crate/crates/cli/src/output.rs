//! Output sinks. Every file starts with `#` lines carrying the tool version
//! and the resolved run configuration.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn header<W: Write + ?Sized>(out: &mut W, config: &serde_json::Value) -> io::Result<()> {
    writeln!(out, "# xkerr {VERSION}")?;
    writeln!(out, "# config: {config}")?;
    writeln!(out, "# units: w = omega/2Omega, tau = 2Omega t, power in W")
}

/// Writes a commented header followed by a CSV table.
pub fn csv_table<S: AsRef<str>>(
    path: Option<&Path>,
    config: &serde_json::Value,
    columns: &[S],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    let mut out = open(path)?;
    header(&mut out, config)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(columns.iter().map(|c| c.as_ref()))?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
    }
    out.flush()
}

#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    version: &'a str,
    config: &'a serde_json::Value,
    result: T,
}

pub fn json_record<T: Serialize>(path: Option<&Path>, config: &serde_json::Value, result: T) -> io::Result<()> {
    let mut out = open(path)?;
    let rec = Record { version: VERSION, config, result };
    serde_json::to_writer_pretty(&mut out, &rec)?;
    writeln!(out)?;
    out.flush()
}

/// JSON array of row objects for grid outputs requested as JSON.
pub fn json_table<S: AsRef<str>>(
    path: Option<&Path>,
    config: &serde_json::Value,
    columns: &[S],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    let rows: Vec<serde_json::Map<String, serde_json::Value>> = rows
        .into_iter()
        .map(|r| columns.iter().map(|c| c.as_ref().to_string()).zip(r.into_iter().map(json_number)).collect())
        .collect();
    json_record(path, config, rows)
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or(serde_json::Value::Null, serde_json::Value::Number)
}
