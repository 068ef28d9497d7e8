//! Command-line orchestration for the `membrane-homog` workbench: experiment
//! configuration, the five subcommands and deterministic output writing.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{plan, run, Command};
pub use config::{ConfigError, ExperimentConfig};
pub use output::{commit, Artifact};
