//! Seeded experiment sweeps over the oblivion estimators.
//!
//! A TOML config names the experiment kind, noise models, sweep axes and seeds;
//! [`commands::run`] executes every (point, seed) pair and writes one CSV row each.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod summary;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
