//! Report rows shared by `sweep` and `compare`, with CSV and JSON
//! serialization. Floats are written with Rust's shortest round-trip
//! formatting so re-parsed files reproduce fits exactly.

use std::io::Write;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "scheme,process,dt,measured,predicted_leading,residual,below_noise_floor";

/// Label used for whole-step rows alongside the per-process ones.
pub const TOTAL: &str = "TOTAL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: String,
    pub process: String,
    pub dt: f64,
    pub measured: f64,
    pub predicted_leading: f64,
    pub residual: f64,
    pub below_noise_floor: bool,
}

/// Deterministic order: (scheme, process, dt descending).
pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        (&a.scheme, &a.process)
            .cmp(&(&b.scheme, &b.process))
            .then(b.dt.total_cmp(&a.dt))
    });
}

pub fn write_csv(mut out: impl Write, rows: &[ReportRow]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scheme, r.process, r.dt, r.measured, r.predicted_leading, r.residual,
            r.below_noise_floor
        )?;
    }
    Ok(())
}

pub fn write_json(out: impl Write, rows: &[ReportRow]) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => bail!("bad CSV header: {:?}", other),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            bail!("line {}: expected 7 fields, got {}", i + 2, fields.len());
        }
        let num = |j: usize| -> Result<f64> {
            fields[j]
                .parse()
                .with_context(|| format!("line {}: bad number `{}`", i + 2, fields[j]))
        };
        rows.push(ReportRow {
            scheme: fields[0].to_string(),
            process: fields[1].to_string(),
            dt: num(2)?,
            measured: num(3)?,
            predicted_leading: num(4)?,
            residual: num(5)?,
            below_noise_floor: fields[6]
                .parse()
                .with_context(|| format!("line {}: bad flag `{}`", i + 2, fields[6]))?,
        });
    }
    Ok(rows)
}
