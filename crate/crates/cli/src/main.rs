//! `platoon`: simulate and optimize mixed-autonomy platoons.
//!
//! Exit codes: 0 success, 2 invalid input, 3 failure while computing.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod io;

#[derive(Parser, Debug)]
#[command(name = "platoon", version, about = "Mixed-autonomy platoon simulation and optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario file (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override a scenario key, e.g. `--set objective.mu=100`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for randomized inputs (grad-check only; everything else is deterministic).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for independent runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward simulation with fixed AV controls.
    Simulate {
        /// Control CSV as written by `optimize`; zero controls otherwise.
        #[arg(long)]
        controls: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize the AV controls of the scenario.
    Optimize {
        /// Starting controls: `zero`, or `reference` (every AV starts from
        /// the optimal schedule of a lone AV behind the leader).
        #[arg(long, default_value = "reference", value_parser = ["zero", "reference"])]
        init: String,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the adjoint gradient with central finite differences.
    GradCheck {
        /// Finite-difference step (m/s²).
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        /// Evaluate at uniform random controls in [-amplitude, amplitude].
        #[arg(long, default_value_t = 0.0)]
        amplitude: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize with 1, 2, ... spaced AVs and tabulate reductions.
    SweepPenetration {
        /// Largest AV count; the scenario's `sweep.max_avs` when omitted.
        #[arg(long)]
        max_avs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the scenario's synthetic leader as a `t,v` CSV.
    GenLeader {
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate reductions of earlier runs against a baseline run.
    Report {
        /// Run directory (containing `metrics.json`) of the baseline.
        #[arg(long)]
        baseline: PathBuf,
        /// Run directories to compare.
        runs: Vec<PathBuf>,
        /// Greedy and full run directories, compared pairwise.
        #[arg(long, num_args = 2, value_names = ["GREEDY", "FULL"])]
        greedy_full: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Runtime(String),
}

impl From<platoon_core::PlatoonError> for CliError {
    fn from(e: platoon_core::PlatoonError) -> Self {
        if e.is_validation() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { controls, common } => commands::simulate(&common, controls.as_deref()),
        Command::Optimize { init, common } => commands::optimize(&common, &init),
        Command::GradCheck { step, amplitude, common } => commands::grad_check(&common, step, amplitude),
        Command::SweepPenetration { max_avs, common } => commands::sweep(&common, max_avs),
        Command::GenLeader { common } => commands::gen_leader(&common),
        Command::Report {
            baseline,
            runs,
            greedy_full,
            common,
        } => commands::report(&common, &baseline, &runs, &greedy_full),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
