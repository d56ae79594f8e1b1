//! Config-driven runs on top of [`driftlab_core`]: TOML run files, CSV and
//! JSON artifacts, and the `driftlab` command line.
//!
//! A run executes exactly one command and writes its artifacts, a
//! `config.toml` echo and a `summary.txt` into the output directory. Every
//! JSON artifact carries the SHA-256 of the effective configuration.

pub mod config;
pub mod error;
pub mod export;
pub mod run;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use run::{run, Outcome};

/// Exit status for a run whose verdicts all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a configuration or runtime error.
pub const EXIT_ERROR: i32 = 1;
/// Exit status for a run with at least one failed verdict.
pub const EXIT_FAIL: i32 = 2;
