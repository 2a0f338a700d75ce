//! `ratio-cpd`: generate benchmark series, score them for change points,
//! evaluate the scores, and run the full benchmark matrix.
//!
//! Exit status: 0 success, 2 usage error, 3 data error, 4 runtime error.

use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod manifest;
mod output;
mod plot;
mod scores;

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.exit as u8)
        }
    }
}
