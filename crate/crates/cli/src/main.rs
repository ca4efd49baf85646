use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match fodkit_cli::run(fodkit_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
