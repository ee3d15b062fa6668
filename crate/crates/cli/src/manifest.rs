//! Run manifests: everything needed to reproduce a training run, plus
//! provenance (git describe, start time). Re-running a manifest reproduces
//! the metrics CSV byte-for-byte except for wall_seconds.

use crate::error::{CliError, Result};
use actgrad_core::network::{ActivationKind, ModelConfig, ModelSize};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub size: String,
    pub activation: String,
    pub fourier_rank: usize,
    pub per_channel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerManifest {
    pub algorithm: String,
    pub rho: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_schedule: String,
    /// Autoencoder epochs per conv layer before supervised training; 0 means
    /// no pretraining.
    pub ae_epochs_per_layer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    /// Stratified training subset size; None trains on the full merged set.
    pub train_subset: Option<usize>,
    /// Stratified validation subset size; None evaluates the full test batch.
    pub val_subset: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: ModelManifest,
    pub optimizer: OptimizerManifest,
    pub data: DataManifest,
    pub seed: u64,
    pub git_describe: String,
    /// Unix seconds at run start; provenance only, not a run input.
    pub started_at: u64,
}

impl RunManifest {
    pub fn model_config(&self) -> Result<ModelConfig> {
        let size = ModelSize::parse(&self.model.size)?;
        let activation = ActivationKind::parse(&self.model.activation)?;
        let mut cfg = ModelConfig::new(size, activation, self.seed);
        cfg.fourier_rank = self.model.fourier_rank;
        cfg.per_channel = self.model.per_channel;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        // serde_json cannot fail on this struct: no maps, no non-string keys
        serde_json::to_string_pretty(self).expect("manifest serialization")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("manifest {}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|detail| CliError::Usage(format!("manifest {}: {detail}", path.display())))
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

/// `git describe --always --dirty`, or "unknown" outside a repository.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|out| out.status.success())
        .and_then(|out| String::from_utf8(out.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
