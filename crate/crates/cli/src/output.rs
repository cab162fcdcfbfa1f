//! CSV and JSON writers. Every file carries the resolved config; CSV files
//! start with a versioned comment header.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const CSV_VERSION: u32 = 1;

pub struct Table {
    pub kind: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key: value` lines after the config line.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(kind: &'static str, header: Vec<String>) -> Self {
        Table {
            kind,
            header,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Shortest round-trip formatting, in exponent form for very small or
/// large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Empty for missing values.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv(dir: &Path, name: &str, table: &Table, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut buf: Vec<u8> = Vec::new();
    writeln!(buf, "# finsler-lab {} csv v{CSV_VERSION}", table.kind)?;
    writeln!(buf, "# config: {}", serde_json::to_string(&cfg.embedded())?)?;
    for n in &table.notes {
        writeln!(buf, "# {n}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::write(&path, buf)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Per-row wall-clock, written next to the deterministic outputs.
pub fn write_timings(dir: &Path, name: &str, timings: &[(String, f64)]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["id", "seconds"])?;
    for (id, s) in timings {
        w.write_record([id.as_str(), &format!("{s:.3}")])?;
    }
    w.flush()?;
    Ok(path)
}
