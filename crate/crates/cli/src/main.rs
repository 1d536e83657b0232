//! `meanfield-sync` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 hypotheses fail,
//! 3 a synchronization verdict fails, 4 numerical solver failure.

mod args;
mod commands;
mod config;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;

/// A usage or configuration error (exit code 1).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let cfg = RunConfig::resolve(cli)?;
    match cli.command {
        Command::Check => commands::check(&cfg),
        Command::Dispersion => commands::dispersion(&cfg),
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Lock => commands::lock(&cfg),
        Command::Sweep(_) => commands::sweep_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
