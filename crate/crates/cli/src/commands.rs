//! The `run`, `summarize` and `validate` subcommands.

use std::path::Path;

use crate::config::{Direction, ExperimentConfig, Threshold};
use crate::error::{CliError, CliResult};
use crate::experiment::run_all;
use crate::output::write_rows;
use crate::summary::summarize;

/// Process exit statuses.
pub mod status {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const FAILURES: u8 = 2;
}

fn env_number(name: &str) -> CliResult<Option<u64>> {
    match std::env::var(name) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Config(format!("{name}={v:?} is not a nonnegative integer"))),
        Err(_) => Ok(None),
    }
}

/// Runs a config; returns the exit status.
pub fn run(config_path: &Path) -> CliResult<u8> {
    let cfg = ExperimentConfig::load(config_path)?;
    let seeds = cfg.seeds.resolve(env_number("OBLIVION_SEED")?);
    let threads = env_number("OBLIVION_THREADS")?.unwrap_or(0) as usize;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("OBLIVION_THREADS: {e}")))?;
    let rows = pool.install(|| run_all(&cfg, &seeds))?;
    let out = cfg.output_path(config_path);
    write_rows(&out, &rows)?;

    let failed = rows.iter().filter(|r| r.is_flagged() || cfg.threshold.as_ref().is_some_and(|t| !t.accepts(r.error))).count();
    let flagged = rows.iter().filter(|r| r.is_flagged()).count();
    println!("{}: {} rows to {} ({} failed, {} flagged)", cfg.experiment_id(), rows.len(), out.display(), failed, flagged);
    let fraction = failed as f64 / rows.len().max(1) as f64;
    if fraction > cfg.failure_tolerance {
        eprintln!("failure fraction {fraction:.3} exceeds tolerance {}", cfg.failure_tolerance);
        return Ok(status::FAILURES);
    }
    Ok(status::OK)
}

/// Threshold from an explicit value or from a config file.
pub fn threshold_for(config: Option<&Path>, value: Option<f64>, direction: Option<Direction>) -> CliResult<Option<Threshold>> {
    let from_config = match config {
        Some(p) => ExperimentConfig::load(p)?.threshold,
        None => None,
    };
    Ok(match (value, from_config) {
        (Some(value), _) => Some(Threshold { value, direction: direction.unwrap_or_default() }),
        (None, Some(mut t)) => {
            if let Some(d) = direction {
                t.direction = d;
            }
            Some(t)
        }
        (None, None) => None,
    })
}

pub fn summarize_file(results: &Path, threshold: Option<&Threshold>) -> CliResult<u8> {
    let summary = summarize(results, threshold)?;
    print!("{}", summary.render());
    Ok(status::OK)
}

pub fn validate(config_path: &Path) -> CliResult<u8> {
    let cfg = ExperimentConfig::load(config_path)?;
    let points = cfg.points()?.len();
    let seeds = cfg.seeds.resolve(None).len();
    println!(
        "{}: valid, {points} points x {seeds} seeds = {} rows to {}",
        cfg.experiment_id(),
        points * seeds,
        cfg.output_path(config_path).display()
    );
    Ok(status::OK)
}
