//! Library backing the `textline` binary.
//!
//! Every subcommand is an ordinary function taking a plain argument struct and
//! returning the list of files it wrote, so integration tests drive the exact
//! code path the binary uses without spawning processes.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{
    cmd_detect, cmd_eval, cmd_fit, cmd_synth, cmd_train, CliError, DetectArgs, EvalArgs, FitArgs,
    SynthArgs, TrainArgs,
};
pub use config::{Config, Overrides, CONFIG_ENV};
