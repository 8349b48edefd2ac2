//! Configuration and subcommands behind the `dpi` binary.

pub mod commands;
pub mod config;

pub use commands::Failure;
pub use config::{parse_config, ConfigError, RunConfig};

/// Environment variable bounding the worker pool used for label generation.
pub const WORKERS_ENV: &str = "DPI_WORKERS";

/// Reads [`WORKERS_ENV`]. Unset or empty means "use every core".
pub fn workers_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ConfigError(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}
