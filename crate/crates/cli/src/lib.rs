//! Experiment runner behind the `descent` binary: experiment files, seed
//! sweeps, trace output and the analysis subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod summary;

pub use error::CliError;
