//! Per-point aggregation of a results file.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use oblivion_core::stats::median;

use crate::config::Threshold;
use crate::error::CliResult;
use crate::output::{timing_path, COLUMNS};

/// Aggregate of the rows sharing one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    /// `experiment, eta, alpha, m, d, t` as written in the file.
    pub key: [String; 6],
    pub rows: usize,
    /// Lower median over rows with a finite error.
    pub median_error: Option<f64>,
    /// Fraction of all rows whose error passes the threshold.
    pub success_fraction: Option<f64>,
    pub flagged: usize,
    pub mean_wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub points: Vec<PointSummary>,
    /// `(line, reason)` for every skipped row.
    pub malformed: Vec<(u64, String)>,
}

struct Parsed {
    key: [String; 6],
    error: f64,
}

fn parse(record: &csv::StringRecord) -> Result<Parsed, String> {
    if record.len() != COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", COLUMNS.len(), record.len()));
    }
    let field = |i: usize| record.get(i).unwrap_or("");
    for (i, name) in [(1, "seed"), (5, "d"), (8, "queries")] {
        field(i).parse::<u64>().map_err(|_| format!("{name} is not an integer: {:?}", field(i)))?;
    }
    for (i, name) in [(2, "eta"), (3, "alpha"), (6, "t")] {
        field(i).parse::<f64>().map_err(|_| format!("{name} is not a number: {:?}", field(i)))?;
    }
    if !field(4).is_empty() {
        field(4).parse::<u64>().map_err(|_| format!("m is not an integer: {:?}", field(4)))?;
    }
    let error = field(7).parse::<f64>().map_err(|_| format!("error is not a number: {:?}", field(7)))?;
    let key = [0, 2, 3, 4, 5, 6].map(|i| field(i).to_string());
    Ok(Parsed { key, error })
}

/// Reads wall times by row index from the timing sidecar, if present.
fn read_timings(results: &Path) -> Option<HashMap<usize, f64>> {
    let mut reader = csv::Reader::from_path(timing_path(results)).ok()?;
    let mut out = HashMap::new();
    for rec in reader.records().flatten() {
        if let (Some(Ok(i)), Some(Ok(t))) = (rec.get(0).map(str::parse::<usize>), rec.get(1).map(str::parse::<f64>)) {
            out.insert(i, t);
        }
    }
    Some(out)
}

pub fn summarize(results: &Path, threshold: Option<&Threshold>) -> CliResult<Summary> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(results)?;
    let timings = read_timings(results);
    let mut order: Vec<[String; 6]> = Vec::new();
    let mut groups: HashMap<[String; 6], Vec<(f64, Option<f64>)>> = HashMap::new();
    let mut malformed = Vec::new();
    for (index, rec) in reader.records().enumerate() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                malformed.push((e.position().map_or(0, |p| p.line()), e.to_string()));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match parse(&rec) {
            Ok(p) => {
                let wall = timings.as_ref().and_then(|t| t.get(&index).copied());
                if !groups.contains_key(&p.key) {
                    order.push(p.key.clone());
                }
                groups.entry(p.key).or_default().push((p.error, wall));
            }
            Err(reason) => malformed.push((line, reason)),
        }
    }
    let points = order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let finite: Vec<f64> = rows.iter().map(|r| r.0).filter(|e| e.is_finite()).collect();
            let walls: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
            PointSummary {
                rows: rows.len(),
                median_error: median(&finite).ok(),
                success_fraction: threshold
                    .map(|t| finite.iter().filter(|e| t.accepts(**e)).count() as f64 / rows.len() as f64),
                flagged: rows.len() - finite.len(),
                mean_wall_seconds: (walls.len() == rows.len()).then(|| walls.iter().sum::<f64>() / walls.len() as f64),
                key,
            }
        })
        .collect();
    Ok(Summary { points, malformed })
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

impl Summary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let header = ["experiment", "eta", "alpha", "m", "d", "t", "rows", "median_error", "success", "flagged", "mean_wall_s"];
        let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for p in &self.points {
            let mut line: Vec<String> = p.key.iter().enumerate().map(|(i, k)| short(i, k)).collect();
            line.push(p.rows.to_string());
            line.push(p.median_error.map_or_else(|| "-".to_string(), |e| format!("{e:.6e}")));
            line.push(cell(p.success_fraction, 2));
            line.push(p.flagged.to_string());
            line.push(cell(p.mean_wall_seconds, 3));
            table.push(line);
        }
        let widths: Vec<usize> = (0..header.len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        for row in &table {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        if !self.malformed.is_empty() {
            let _ = writeln!(out, "skipped {} malformed rows:", self.malformed.len());
            for (line, reason) in &self.malformed {
                let _ = writeln!(out, "  line {line}: {reason}");
            }
        }
        out
    }
}

/// Swept floats in their shortest round-trip form.
fn short(column: usize, raw: &str) -> String {
    match column {
        1 | 2 | 5 => raw.parse::<f64>().map_or_else(|_| raw.to_string(), |v| v.to_string()),
        _ => raw.to_string(),
    }
}
