//! TOML run configuration. Every field is optional; command-line flags
//! override the file, which overrides built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub score: ScoreSection,
    pub ssq: SsqSection,
    pub synth: SynthSection,
    pub gradcheck: GradcheckSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub base_channels: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub pretrain_epochs: Option<usize>,
    pub finetune_epochs: Option<usize>,
    pub max_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub strides: Option<Vec<usize>>,
    pub window_step: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub per_stack_crop: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub aggregation: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsqSection {
    pub formula: Option<String>,
    pub mode: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub texture: Option<String>,
    pub velocities: Option<Vec<f64>>,
    pub frames: Option<usize>,
    pub size: Option<usize>,
    pub motion: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub precision: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flag, else config file, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// The effective settings of one invocation, written next to its outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord<S: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub config_file: Option<PathBuf>,
    pub settings: S,
}

impl<S: Serialize> RunRecord<S> {
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(path, json)?;
        Ok(())
    }
}
