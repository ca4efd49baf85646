//! Batch front end for `fodkit`: voxelwise fitting of diffusion volumes,
//! synthetic experiments, throughput benchmarks and the group ANOVA.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod nifti;
pub mod volume;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "fodkit", version, about = "Fiber orientation distribution estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit FODs in every masked voxel of a diffusion volume.
    Fit(commands::fit::FitArgs),
    /// Run synthetic crossing-fiber experiments from a TOML or JSON suite.
    Simulate(commands::simulate::SimulateArgs),
    /// Time the estimators on synthetic voxels.
    Bench(commands::bench::BenchArgs),
    /// Two-way ANOVA of lateralization scores by handedness and gender.
    Anova(commands::anova::AnovaArgs),
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(args) => commands::fit::run(&args).map(|_| ()),
        Command::Simulate(args) => commands::simulate::run(&args),
        Command::Bench(args) => commands::bench::run(&args),
        Command::Anova(args) => commands::anova::run(&args),
    }
}
