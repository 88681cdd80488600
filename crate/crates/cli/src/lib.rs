//! Experiment runner: data generation, training, evaluation and export.

pub mod cli;
pub mod commands;
pub mod config;

pub use cli::{error_line, run, Cli};
pub use config::{DataSource, EvalConfig, ExperimentConfig};
