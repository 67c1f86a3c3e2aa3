use std::process::ExitCode;

use clap::Parser;
use slicedict_cli::args::Cli;

fn main() -> ExitCode {
    // usage errors exit with 2, help and version with 0
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match slicedict_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
