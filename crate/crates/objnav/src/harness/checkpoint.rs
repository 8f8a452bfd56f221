//! Checkpoint and manifest persistence. Checkpoints capture the complete
//! training state — parameters, optimizer moments, standardizer statistics,
//! and per-worker rng/episode state — so a resumed run is bit-identical to an
//! uninterrupted one. JSON numbers round-trip f64 exactly.

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::agent::{Adam, PolicyParams};
use crate::augmentation::Standardizer;
use crate::world::EpisodeSnapshot;
use ndarray::Array1;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerCheckpoint {
    pub rng: ChaCha8Rng,
    pub scene_idx: usize,
    pub episode: EpisodeSnapshot,
    pub hidden: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub frames: u64,
    pub spl: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub frames: u64,
    pub params: PolicyParams,
    pub optimizer: Adam,
    pub standardizer: Standardizer,
    pub workers: Vec<WorkerCheckpoint>,
    pub validations: Vec<ValidationEntry>,
    /// Best validation seen so far; ties keep the earliest frame count.
    pub best: Option<ValidationEntry>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, HarnessError> {
        let raw = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&raw)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(HarnessError::BadCheckpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}

/// Run summary written next to the checkpoints. Wall-clock timing is
/// informational and excluded from determinism guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: u32,
    pub frames: u64,
    pub wall_clock_seconds: f64,
    pub checkpoints: Vec<ValidationEntry>,
    pub best: Option<ValidationEntry>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest, HarnessError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
