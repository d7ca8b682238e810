use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use oblivion_bench::commands::{self, status};
use oblivion_bench::config::Direction;

#[derive(Parser)]
#[command(name = "oblivion", version, about = "Seeded experiment sweeps for the oblivion estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Below,
    Above,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point and seed of a config and write the results CSV.
    Run { config: PathBuf },
    /// Print per-point medians, success fractions and timings of a results CSV.
    Summarize {
        results: PathBuf,
        /// Read the success threshold from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => commands::run(&config),
        Command::Validate { config } => commands::validate(&config),
        Command::Summarize { results, config, threshold, direction } => {
            let direction = direction.map(|d| match d {
                DirectionArg::Below => Direction::Below,
                DirectionArg::Above => Direction::Above,
            });
            commands::threshold_for(config.as_deref(), threshold, direction)
                .and_then(|t| commands::summarize_file(&results, t.as_ref()))
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("oblivion: {e}");
            ExitCode::from(status::CONFIG)
        }
    }
}
