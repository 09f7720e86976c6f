use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{parse_config, parse_config_str, Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "autochemo",
    version,
    about = "Autochemotactic pattern formation solver"
)]
pub struct Cli {
    /// Increase log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a pattern-formation scenario.
    Simulate {
        /// Configuration file (`key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario preset, e.g. case1 or case3-h06.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a snapshot every N steps instead of at the preset times.
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Snapshot format: csv, vtk or both.
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the manufactured-solution convergence study.
    Converge {
        /// Cells per axis at each level, comma separated.
        #[arg(long, default_value = "8,16,32,64", value_delimiter = ',')]
        levels: Vec<usize>,
        /// Final time.
        #[arg(long = "T", default_value_t = 1.0)]
        final_time: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    pub fn to_config(&self) -> Result<RunConfig, CliError> {
        match self {
            Command::Simulate {
                config,
                preset,
                out,
                snapshot_every,
                format,
                seed,
            } => {
                let overrides = Overrides {
                    preset: preset.clone(),
                    out_dir: out.clone(),
                    snapshot_every: *snapshot_every,
                    format: format.clone(),
                    seed: *seed,
                    ..Default::default()
                };
                match config {
                    Some(path) => parse_config(path, &overrides),
                    None if preset.is_some() => parse_config_str("mode = scenario", &overrides),
                    None => Err(CliError::config("simulate needs --config or --preset")),
                }
            }
            Command::Converge {
                levels,
                final_time,
                out,
            } => {
                let overrides = Overrides {
                    levels: Some(levels.clone()),
                    final_time: Some(*final_time),
                    out_dir: out.clone(),
                    ..Default::default()
                };
                parse_config_str("mode = converge", &overrides)
            }
        }
    }
}
