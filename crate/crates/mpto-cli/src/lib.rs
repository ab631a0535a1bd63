//! Configuration, artifact writers and subcommands of the `mpto` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_gain, cmd_run, cmd_verify, resolve_output_dir, OUTPUT_DIR_ENV};
pub use config::{GainConfig, PipelineChoice, ProblemChoice, RunConfig};
pub use error::CliError;
