use std::process::ExitCode;

use clap::Parser;
use ewa_oracle::cli::{run, Cli, CliCommand};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let command = CliCommand::from(Cli::parse());
    ExitCode::from(run(&command))
}
