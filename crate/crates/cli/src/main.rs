use std::process::ExitCode;

use clap::Parser;
use metricflow_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
