use clap::Parser;
use phaseret_cli::app::{configure_threads, execute, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| execute(&cli.command)) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("phaseret: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
