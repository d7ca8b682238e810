//! Result tables.
//!
//! Rows go to a CSV with a fixed column order; wall times go to a sidecar
//! `<stem>.timing.csv` so the results file is identical across reruns.

use std::path::{Path, PathBuf};

use crate::error::CliResult;
use crate::experiment::ResultRow;

pub const COLUMNS: [&str; 10] = ["experiment", "seed", "eta", "alpha", "m", "d", "t", "error", "queries", "flags"];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() { format!("{v:.16e}") } else { format!("{v}") }
}

pub fn timing_path(results: &Path) -> PathBuf {
    let stem = results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    results.with_file_name(format!("{stem}.timing.csv"))
}

pub fn record(row: &ResultRow) -> [String; 10] {
    [
        row.experiment.clone(),
        row.seed.to_string(),
        format_float(row.point.eta),
        format_float(row.point.alpha),
        row.m.map(|m| m.to_string()).unwrap_or_default(),
        row.point.d.to_string(),
        format_float(row.point.t),
        format_float(row.error),
        row.queries.to_string(),
        row.flags.join(";"),
    ]
}

/// Writes the results file and its timing sidecar.
pub fn write_rows(path: &Path, rows: &[ResultRow]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(COLUMNS)?;
    for row in rows {
        out.write_record(record(row))?;
    }
    out.flush()?;

    let mut timing = csv::Writer::from_path(timing_path(path))?;
    timing.write_record(["row", "wall_seconds"])?;
    for (i, row) in rows.iter().enumerate() {
        timing.write_record([i.to_string(), format_float(row.wall_seconds)])?;
    }
    timing.flush()?;
    Ok(())
}
