//! Command-line front end for `koopman-po`: config resolution, run
//! directories and subcommand dispatch.

pub mod config;
pub mod run;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::Command;

#[derive(Debug, Parser)]
#[command(name = "koopman-po", version, about = "Koopman matrices of partially observed polynomial SDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Simulate trajectories and write snapshot pairs.
    Simulate(RunArgs),
    /// Fit a Koopman matrix to simulated or supplied trajectories.
    FitEdmd(RunArgs),
    /// Build the generator and reference Koopman matrix; validate against RK4 when σ = 0.
    Reference(RunArgs),
    /// Mori–Zwanzig split and generalized Langevin integration.
    Mz(RunArgs),
    /// Partial-observation accuracy over delay depths.
    Trial(RunArgs),
    /// σ, dictionary-degree or degree-pair sweep.
    Sweep(RunArgs),
    /// Power-law exponent table.
    Table(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set system.sigma=0.3` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Base seed: simulation seed and first repetition seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "KOOPMAN_PO_JOBS")]
    pub jobs: Option<usize>,
    /// Parent directory of the run directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long)]
    pub force: bool,
}

impl Cmd {
    pub fn split(&self) -> (Command, &RunArgs) {
        match self {
            Cmd::Simulate(a) => (Command::Simulate, a),
            Cmd::FitEdmd(a) => (Command::FitEdmd, a),
            Cmd::Reference(a) => (Command::Reference, a),
            Cmd::Mz(a) => (Command::Mz, a),
            Cmd::Trial(a) => (Command::Trial, a),
            Cmd::Sweep(a) => (Command::Sweep, a),
            Cmd::Table(a) => (Command::Table, a),
        }
    }
}

/// Loads, overrides and resolves the configuration for a command line.
pub fn resolve(command: Command, args: &RunArgs) -> Result<config::RunConfig> {
    let mut cfg = config::load(args.config.as_deref(), &args.set)?;
    if let Some(out) = &args.out {
        cfg.io.out = Some(out.to_string_lossy().into_owned());
    }
    if args.force {
        cfg.io.force = Some(true);
    }
    if args.jobs.is_some() {
        cfg.io.jobs = args.jobs;
    }
    let mut cfg = cfg.resolve(command)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

pub fn main_with(cli: Cli) -> Result<PathBuf> {
    let (command, args) = cli.command.split();
    let cfg = resolve(command, args)?;
    run::execute(&cfg)
}
