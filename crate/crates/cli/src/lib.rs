//! The `swr` command line: prepare, analyze, synth, train, evaluate, bench, sweep.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod error;
pub mod paths;

pub use error::{CliError, CliResult};
