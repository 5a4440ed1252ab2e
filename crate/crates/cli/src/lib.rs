//! Config-driven runner for the thermops simulations.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, Mode, ParsedConfig, RunConfig};
pub use run::{run, RunError, RunOptions};

/// Thread count from `THERMOPS_THREADS`; 0 or unset means rayon's default.
pub fn threads_from_env() -> Result<usize, String> {
    match std::env::var("THERMOPS_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("THERMOPS_THREADS must be a non-negative integer, got {v:?}")),
    }
}
