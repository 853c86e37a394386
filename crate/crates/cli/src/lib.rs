//! Command-line front end: configuration files, scenario runs, preset and
//! sweep execution, and the percolation, bound and benchmark calculators.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 divergence in
//! `run` mode, 3 numeric failure.

pub mod commands;
pub mod config_file;

pub use commands::{
    execute, main_with_args, Cli, CliError, Command, EXIT_CONFIG, EXIT_DIVERGED, EXIT_NUMERIC, EXIT_OK, THREADS_ENV,
};
pub use config_file::{parse_config, parse_config_str, serialize, ConfigError};
