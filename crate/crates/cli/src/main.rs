use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = dpmix_cli::Cli::parse();
    match dpmix_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status as u8)
        }
    }
}
