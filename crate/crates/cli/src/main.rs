//! `tagmatch`: command-line front end for the tag-matching experiments.

mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::{RunConfig, UsageError};

fn run(cli: &Cli) -> anyhow::Result<()> {
    let common = cli.command.common();
    let mut config = RunConfig::load(common.config.as_deref())?;
    cli.command.apply(&mut config);
    config.validate()?;
    let jobs = common.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    pool.install(|| match &cli.command {
        Command::Normalize(_) => commands::normalize(&config),
        Command::Geometry(_) => commands::geometry(&config),
        Command::Variation(_) => commands::variation(&config),
        Command::Evolve(_) => commands::evolve(&config),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tagmatch {}: error: {e:#}", cli.command.name());
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
