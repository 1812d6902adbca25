use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eh_estimation::config::PolicyName;
use eh_estimation::harness::{self, Command, RunOptions};

#[derive(Parser)]
#[command(name = "eh-estimation", version, about = "Transmission-power policies for an energy-harvesting sensor")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides sim.master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the average-cost MDP by relative value iteration.
    Solve(Common),
    /// Build Ψ, q* and the power distribution of the threshold rule.
    Psi(Common),
    /// Monte Carlo cost curve of one policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "threshold", value_parser = ["optimal", "threshold", "greedy"])]
        policy: String,
    },
    /// Optimal, threshold and greedy under common random numbers.
    Compare(Common),
    /// Exact cost of every threshold pair.
    Sweep(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Psi(c) => (Command::Psi, c),
        Cmd::Simulate { common, policy } => {
            let p: PolicyName = policy.parse().expect("restricted by clap");
            (Command::Simulate(p), common)
        }
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let opts = RunOptions {
        config: common.config,
        out: common.out,
        seed: common.seed,
    };
    match harness::run(command, &opts) {
        Ok(report) => {
            for (k, v) in &report.entries {
                println!("{k}={v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
