//! Front end of the `fenvm` binary: configuration and experiment runners.

pub mod commands;
pub mod config;

pub use commands::{run_command, tables, CliError, Table, COMMANDS};
pub use config::{parse_config, Config, ConfigError};
