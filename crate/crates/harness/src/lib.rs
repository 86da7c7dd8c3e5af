//! Configuration, experiment runner and CLI for filterlab.

pub mod cli;
pub mod config;
pub mod experiment;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, ExperimentReport, RunContext};
