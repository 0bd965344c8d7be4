//! Command-line front end: config resolution, the `solve`, `simulate`,
//! `compare`, `sweep` and `verify` subcommands, and their CSV outputs.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

use clap::{Parser, Subcommand};

pub use commands::{cmd_compare, cmd_simulate, cmd_solve, cmd_sweep, cmd_verify, Outcome};
pub use config::{Axis, Overrides, PolicyChoice, RunConfig};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "ehaoi", version, about = "Optimal status updates with harvested and paid energy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the MDP; write thresholds.csv and policy_grid.csv
    Solve(Overrides),
    /// Monte Carlo evaluation of one policy over the configured seeds
    Simulate(Overrides),
    /// Optimal vs zero-wait vs periodic across a sweep axis
    Compare(Overrides),
    /// Gain and thresholds across a sweep axis
    Sweep(Overrides),
    /// Solve, then run the structural value-function checks
    Verify(Overrides),
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let (overrides, f): (&Overrides, fn(&RunConfig) -> Result<Outcome>) = match &cli.command {
        Command::Solve(o) => (o, cmd_solve),
        Command::Simulate(o) => (o, cmd_simulate),
        Command::Compare(o) => (o, cmd_compare),
        Command::Sweep(o) => (o, cmd_sweep),
        Command::Verify(o) => (o, cmd_verify),
    };
    let cfg = RunConfig::from_overrides(overrides)?;
    f(&cfg)
}
