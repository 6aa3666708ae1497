mod commands;
mod config;
mod error;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::config::{Cli, RunConfig};
use crate::error::CliError;

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::usage(e.to_string().trim_end())),
    };
    if let Some(path) = &cli.dump_table {
        let bytes = commands::corrector_dump().render(config::Format::Csv);
        return report::emit(&bytes, Some(path));
    }
    commands::execute(&RunConfig::resolve(cli)?)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wmspec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
