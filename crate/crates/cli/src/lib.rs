//! Command-line driver: configuration, output writers and the run loop.

pub mod args;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_str, Mode, OutputFormat, Overrides, RunConfig};
pub use error::CliError;
pub use run::{run, RunOutcome};

/// Sizes the global worker pool from `AUTOCHEMO_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AUTOCHEMO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        CliError::config(format!(
            "AUTOCHEMO_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot configure {n} worker threads: {e}")))
}
