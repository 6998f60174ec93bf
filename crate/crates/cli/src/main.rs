mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, EXIT_OK, EXIT_USAGE};

fn run() -> Result<(), CliError> {
    let argv = args::merge_config(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match &cli.command {
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Capacity(a) => commands::capacity_cmd(a),
        Command::Demo(a) => commands::demo_cmd(a),
        Command::Verify(a) => commands::verify_cmd(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("healthchain: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
