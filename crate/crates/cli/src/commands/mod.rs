//! Command implementations and the error-to-exit-code mapping: a missing
//! input file exits with 2, every other failure with 1.

pub mod eval;
pub mod inspect;
pub mod synth;
pub mod train;
pub mod verify;

use crate::config::RunConfig;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// A required input file or path is absent (exit code 2).
    MissingInput(String),
    /// Any other failure (exit code 1).
    Other(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError::Other(error)
    }
}

impl From<tempora_core::Error> for CliError {
    fn from(error: tempora_core::Error) -> Self {
        CliError::Other(error.into())
    }
}

pub type CmdResult = Result<(), CliError>;

/// Fail with exit code 2 (naming the path) when `path` does not exist.
pub fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(format!(
            "{what} not found: {}",
            path.display()
        )))
    }
}

pub fn code_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Resolve the worker-thread cap (flag > TEMPORA_THREADS > config key; 0
/// leaves the pool at its default size) and apply it to the global pool.
pub fn setup_threads(flag: Option<usize>, config: &RunConfig) {
    let env_threads = std::env::var("TEMPORA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let n = flag.or(env_threads).unwrap_or(config.threads);
    if n > 0 {
        // fails only if a pool already exists, e.g. in tests — keep that one
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Resolve a config from defaults, an optional file, and `--set` pairs, in
/// that order (later sources win).
pub fn resolve_config(
    config_file: Option<&Path>,
    sets: &[String],
) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config_file {
        require_file(path, "config file")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Other(anyhow::anyhow!("reading {}: {e}", path.display())))?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    for pair in sets {
        cfg.apply_set(pair)?;
    }
    Ok(cfg)
}
