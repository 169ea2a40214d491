mod args;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use phenorag_core::config::PartialConfig;
use phenorag_core::RunConfig;

use args::{Cli, Command};
use error::CliResult;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn config_file(explicit: Option<PathBuf>) -> CliResult<PartialConfig> {
    let path = explicit.or_else(|| std::env::var_os("PHENORAG_CONFIG").map(PathBuf::from));
    match path {
        Some(p) => Ok(PartialConfig::from_file(&p)?),
        None => {
            let local = PathBuf::from("phenorag.toml");
            if local.is_file() {
                Ok(PartialConfig::from_file(&local)?)
            } else {
                Ok(PartialConfig::default())
            }
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let file = config_file(cli.config)?;
    let env = PartialConfig::from_env()?;
    let flags = cli.command.config_layer();
    let cfg = RunConfig::resolve(&file, &env, &flags)?;
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a, &cfg),
        Command::Index(a) => commands::index(a, &cfg),
        Command::Run(a) => commands::run(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::Stats(a) => commands::stats(a, &cfg),
    }
}
