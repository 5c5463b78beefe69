//! Command-line front end for the `excouple` experiments.

pub mod commands;
pub mod config;
pub mod exit;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigLayer, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "excouple", version, about = "Exact couplings of random walks on discrete groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the block coupling; writes runs.jsonl, tail.csv, plan.json.
    Couple(RunArgs),
    /// Exact total variation curve, decay fit and coupling inequality; writes tv.csv, fit.json.
    Tv(RunArgs),
    /// Membership verdicts for the coupling shift sets; writes verdict.json, closure.txt.
    Solve(RunArgs),
    /// Free-group separation experiment; writes separation.json, tv.csv, verdict.json.
    DemoFreegroup(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat TOML file with the same keys as the flags (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Omit the timestamp comment line from CSV outputs.
    #[arg(long)]
    pub no_timestamp: bool,
    #[command(flatten)]
    pub layer: ConfigLayer,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Couple(a) | Command::Tv(a) | Command::Solve(a) | Command::DemoFreegroup(a) => a,
        }
    }
}

/// Resolves the configuration and runs the command on a pool of the
/// configured size.
pub fn run(cli: &Cli) -> Result<()> {
    let args = cli.command.args();
    let fallback = matches!(cli.command, Command::DemoFreegroup(_)).then_some("free2");
    let cfg = ExperimentConfig::resolve(&args.layer, args.config.as_deref(), !args.no_timestamp, fallback)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| match cli.command {
        Command::Couple(_) => commands::couple(&cfg),
        Command::Tv(_) => commands::tv(&cfg),
        Command::Solve(_) => commands::solve(&cfg),
        Command::DemoFreegroup(_) => commands::demo_freegroup(&cfg),
    })
}
