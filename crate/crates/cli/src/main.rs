use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tensor_mp_cli::{exit_code, execute_with_threads, render, Cli, EXIT_FAILURE};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common().clone();
    let text = match execute_with_threads(&cli.command).and_then(|ex| render(&ex, common.format)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let written = match &common.out {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(EXIT_FAILURE as u8);
    }
    ExitCode::SUCCESS
}
