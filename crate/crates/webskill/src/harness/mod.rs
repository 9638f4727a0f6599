//! Experiment orchestration: configs, artifact files, and the CLI commands.

pub mod artifacts;
pub mod commands;
pub mod config;

pub use commands::{cmd_continual, cmd_explore, cmd_metrics, cmd_replay, cmd_run, HarnessError};
pub use config::{ExperimentConfig, Mode};
