use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cogra::runner::{run, Command as RunnerCommand, RunOptions};

/// Transmit-power and frame-duration optimization for a cognitive link
/// coexisting with an unslotted ON/OFF primary user.
#[derive(Parser)]
#[command(name = "cogra-opt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize energy efficiency jointly over power policy and frame.
    OptimizeEe(CommonArgs),
    /// Maximize throughput subject to a minimum-EE requirement.
    OptimizeRateMinEe(CommonArgs),
    /// Report whether the collision constraint admits any frame duration.
    Feasibility(CommonArgs),
    /// Compare analytic collision ratios and throughput against the
    /// renewal-process Monte Carlo oracle.
    Validate(CommonArgs),
    /// Sweep the parameter named in the scenario file, one CSV row per point.
    Sweep(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario description (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for Monte Carlo runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Quadrature nodes per fading dimension.
    #[arg(long)]
    grid_order: Option<usize>,
    /// Monte Carlo trials per estimate.
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Command::OptimizeEe(a) => (RunnerCommand::OptimizeEe, a),
        Command::OptimizeRateMinEe(a) => (RunnerCommand::OptimizeRateMinEe, a),
        Command::Feasibility(a) => (RunnerCommand::Feasibility, a),
        Command::Validate(a) => (RunnerCommand::Validate, a),
        Command::Sweep(a) => (RunnerCommand::Sweep, a),
    };
    let code = run(&RunOptions {
        command,
        scenario_path: args.scenario,
        out_path: args.out,
        seed: args.seed,
        grid_order: args.grid_order,
        trials: args.trials,
    });
    ExitCode::from(code as u8)
}
