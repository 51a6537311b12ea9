use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{FileConfig, RunRecord};
use crate::error::{CliError, CliResult};

pub mod eval;
pub mod gradcheck;
pub mod score;
pub mod ssq;
pub mod synth;
pub mod train;

/// Settings shared by every command after config merging.
pub struct Context {
    pub seed: u64,
    pub threads: usize,
    pub config_file: Option<PathBuf>,
    pub file: FileConfig,
}

impl Context {
    pub fn record<S: Serialize>(&self, command: &'static str, settings: S) -> RunRecord<S> {
        RunRecord {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            threads: self.threads,
            config_file: self.config_file.clone(),
            settings,
        }
    }
}

pub(crate) fn require_exists(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} {} does not exist", path.display())))
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

/// Parses a string flag/config value through `FromStr`, mapping failures to
/// usage errors.
pub(crate) fn parse_setting<T>(value: &str, what: &str) -> CliResult<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::usage(format!("invalid {what} `{value}`: {e}")))
}
