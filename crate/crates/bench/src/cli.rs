use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::commands::{cmd_bench, cmd_gen, cmd_oracle, cmd_solve};
use crate::config::{ExperimentConfig, Settings};
use crate::error::{CliError, Result};
use crate::results::write_json;

#[derive(Debug, Parser)]
#[command(name = "mpsca", version)]
#[command(about = "Joint multicast beamforming and antenna selection: instances, solves, oracles and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one random instance file per trial
    Gen(CommonArgs),
    /// Run joint selection on an instance file and print the result as JSON
    Solve(InstanceArgs),
    /// Monte-Carlo sweep over trials and K, written as CSV and/or JSON
    Bench(CommonArgs),
    /// Exhaustive subset search (analytic for one user) on an instance file
    Oracle(InstanceArgs),
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// JSON file with default settings; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, clap::Args)]
pub struct InstanceArgs {
    /// Instance file written by `gen`
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl CommonArgs {
    /// Flags layered over the config file, if any.
    fn layered(&self) -> Result<Settings> {
        Ok(match &self.config {
            Some(path) => self.settings.over(&Settings::read(path)?),
            None => self.settings.clone(),
        })
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::resolve(&self.layered()?, None)
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, path),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(args) => {
            let paths = cmd_gen(&args.resolve()?)?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::Solve(args) => {
            let cfg = args.common.resolve()?;
            emit(&cmd_solve(&args.instance, &cfg)?, cfg.out.as_deref())?;
        }
        Command::Oracle(args) => {
            let cfg = args.common.resolve()?;
            let restarts = args.common.layered()?.restarts.unwrap_or(cfg.oracle_restarts);
            emit(&cmd_oracle(&args.instance, &cfg, restarts)?, cfg.out.as_deref())?;
        }
        Command::Bench(args) => {
            let report = cmd_bench(&args.resolve()?)?;
            for p in &report.files {
                println!("{}", p.display());
            }
            let failed = report.failures();
            if failed > 0 {
                eprintln!("warning: {failed} of {} rows failed", report.rows.len());
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
