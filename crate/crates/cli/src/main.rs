use std::process::ExitCode;

use clap::Parser;
use finsler_lab::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("finsler-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
