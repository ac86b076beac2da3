use std::fs;
use std::path::{Path, PathBuf};

use channelkan::channel::{DatasetSpec, SplitSizes, SystemConfig};
use channelkan::eval::{BaselineKind, GridConfig, LinkConfig};
use channelkan::model::ModelConfig;
use channelkan::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a command needs. Defaults, then a config file, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub data: DatasetSpec,
    pub splits: SplitSizes,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub link: LinkConfig,
    /// Link SNRs evaluated by `eval`, one report row each.
    pub eval_snrs: Vec<f64>,
    pub grid: GridAxes,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridAxes {
    pub velocities: Vec<f64>,
    pub snrs: Vec<Option<f64>>,
    pub ablations: Vec<String>,
    pub seeds: Vec<u64>,
    pub baselines: Vec<BaselineKind>,
    pub ar_order: usize,
}

impl Default for GridAxes {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            velocities: g.velocities,
            snrs: g.snrs,
            ablations: g.ablations,
            seeds: g.seeds,
            baselines: g.baselines,
            ar_order: g.ar_order,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub baseline: Option<BaselineKind>,
    pub oracle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let system = SystemConfig::desk();
        let grid = GridConfig::default();
        Self {
            seed: 0,
            model: ModelConfig::for_system(&system),
            system,
            data: grid.data,
            splits: grid.splits,
            train: grid.train,
            link: grid.link,
            eval_snrs: vec![grid.link.snr_db],
            grid: GridAxes::default(),
            paths: Paths::default(),
        }
    }
}

/// Written next to every command's outputs before the work starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub config: RunConfig,
    pub artifacts: Vec<PathBuf>,
}

impl RunConfig {
    /// Reads a config file, or the `config` block of a manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{} is not JSON: {e}", path.display())))?;
        let body = match value.get("command").and(value.get("config")) {
            Some(cfg) => cfg.clone(),
            None => value,
        };
        serde_json::from_value(body)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Copies the data-derived dimensions into the model config.
    pub fn sync_model_dims(&mut self) {
        self.model.history_len = self.data.history_len;
        self.model.horizon = self.data.horizon;
        self.model.subcarriers = self.system.subcarriers;
        self.model.pairs = self.system.pairs();
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            system: self.system.clone(),
            data: self.data.clone(),
            splits: self.splits,
            model: self.model.clone(),
            train: self.train.clone(),
            link: self.link,
            velocities: self.grid.velocities.clone(),
            snrs: self.grid.snrs.clone(),
            ablations: self.grid.ablations.clone(),
            seeds: self.grid.seeds.clone(),
            baselines: self.grid.baselines.clone(),
            ar_order: self.grid.ar_order,
        }
    }
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    artifacts: Vec<PathBuf>,
) -> Result<(), CliError> {
    let manifest = Manifest {
        command: command.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: config.clone(),
        artifacts,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(channelkan::Error::from)?;
    fs::write(dir.join("manifest.json"), json).map_err(channelkan::Error::from)?;
    Ok(())
}
