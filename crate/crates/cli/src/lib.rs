//! Command-line driver for qubot landscapes, simulations and sweeps.
//!
//! * [`config`]: presets, JSON configuration files and flag overrides.
//! * [`commands`]: the `landscape`, `simulate`, `sweep` and `logical-check`
//!   subcommands.
//! * [`checks`]: embedded acceptance assertions (`--check`).
//! * [`output`]: deterministic CSV and JSON emission.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::CliError;
