use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use driftlab::{RunConfig, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "driftlab", version, about = "Sublinear semigroup laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the command described by a run configuration.
    Run {
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; overrides the configured count without entering
        /// the configuration echo.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, seed, out, workers } = Cli::parse().command;
    let code = match execute(&config, seed, &out, workers) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}

fn execute(path: &Path, seed: Option<u64>, out: &Path, workers: Option<usize>) -> driftlab::CliResult<bool> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let workers = workers.unwrap_or(cfg.workers);
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| driftlab::CliError::Io(e.to_string()))?;
    }
    let outcome = driftlab::run(&cfg, out)?;
    print!("{}", outcome.summary);
    Ok(outcome.passed)
}
