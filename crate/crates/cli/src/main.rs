use std::process::ExitCode;

use autochemo_cli::args::Cli;
use autochemo_cli::{configure_threads, run, CliError};
use clap::Parser;

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = cli.command.to_config();
    init_logging(config.as_ref().map_or(0, |c| c.verbosity).max(cli.verbose));
    let config = config?;
    configure_threads()?;
    let outcome = run(&config)?;
    print!("{}", outcome.report());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
