//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure (including replay mismatch),
//! 2 usage or configuration errors.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use webskill::harness::{cmd_continual, cmd_explore, cmd_metrics, cmd_replay, cmd_run};

#[derive(Parser)]
#[command(name = "webskill", version, about = "Continual skill learning for web agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a task-defined learning curriculum.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the family seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Task-free exploration: the agent proposes its own goals.
    Explore {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phased continual learning with a forgetting table.
    Continual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics from stored logs and a library directory.
    Metrics {
        /// Trajectory JSONL file(s).
        #[arg(long, required = true)]
        log: Vec<PathBuf>,
        /// Library directory (as written by the learning commands).
        #[arg(long)]
        library: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a logged trajectory and check its digests.
    Replay {
        /// Artifacts directory produced by run/explore/continual.
        #[arg(long)]
        artifacts: PathBuf,
        /// Trajectory id to replay.
        #[arg(long)]
        id: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Explore { config, seed, out } => cmd_explore(&config, seed, out),
        Command::Continual { config, seed, out } => cmd_continual(&config, seed, out),
        Command::Metrics {
            log,
            library,
            gamma,
            out,
        } => cmd_metrics(&log, &library, gamma, out),
        Command::Replay { artifacts, id } => match cmd_replay(&artifacts, &id) {
            Ok(true) => Ok(()),
            Ok(false) => std::process::exit(1),
            Err(e) => Err(e),
        },
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
