//! Configuration, fit-artifact caching, parallel bias sweeps and the
//! subcommands of the `dqd` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod sweep;

pub use config::{Method, MethodChoice, RawConfig, RunConfig};
pub use error::CliError;
