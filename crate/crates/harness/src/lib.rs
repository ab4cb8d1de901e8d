//! Experiment runner for `llbar-core`: TOML configs, seeded initial data,
//! checkpoints, CSV/JSON output and the `llbar` CLI.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiments;
pub mod initial;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use experiments::{run, RunReport, Setup};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "LLBAR_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`]; unset or empty keeps
/// the default.
pub fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    if text.trim().is_empty() {
        return Ok(());
    }
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("{THREADS_ENV}={text} is not a thread count")))?;
    // a pool that is already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
