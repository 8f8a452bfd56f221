//! Experiment configuration: one JSON document with typo-safe parsing and a
//! content hash embedded in every artifact for provenance.

use crate::agent::PpoConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub k_rays: usize,
    pub max_range: f64,
    /// Gaussian actuation noise on translation and rotation.
    pub actuation_noise: bool,
    /// Minimum geodesic start distance from the success region, meters.
    pub start_min_geodesic: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            grid_width: 24,
            grid_height: 24,
            k_rays: 15,
            max_range: 5.0,
            actuation_noise: true,
            start_min_geodesic: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    /// "synthetic" or "external".
    pub provider: String,
    pub dim: usize,
    pub noise_sigma: f64,
    pub provider_seed: u64,
    /// Embedding file path, required when provider = "external".
    pub external_path: Option<String>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider: "synthetic".to_string(),
            dim: 64,
            noise_sigma: 0.01,
            provider_seed: 7,
            external_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationConfig {
    pub enabled: bool,
    pub alpha: f64,
    /// Sampling pool also contains the unaugmented embedding.
    pub include_original: bool,
    /// Text labels whose pairwise prompt differences form the delta set.
    pub labels: Vec<String>,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            enabled: false,
            alpha: 50.0,
            include_original: true,
            labels: vec![
                "red wall".to_string(),
                "green wall".to_string(),
                "blue wall".to_string(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub total_steps: u64,
    pub workers: usize,
    pub rollout_len: usize,
    pub validation_interval_frames: u64,
    /// Episodes per validation pass; must divide evenly over the Zero-set
    /// scenes (9 targets x eval layouts).
    pub validation_episodes: usize,
    /// Layout generator seeds for the biased training pool.
    pub train_layout_seeds: Vec<u64>,
    /// Held-out layout seeds used only for validation and evaluation.
    pub eval_layout_seeds: Vec<u64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            total_steps: 1_000_000,
            workers: 8,
            rollout_len: 192,
            validation_interval_frames: 50_000,
            validation_episodes: 90,
            train_layout_seeds: (0..20).collect(),
            eval_layout_seeds: (1000..1005).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub out_dir: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { out_dir: "runs/default".to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub world: WorldConfig,
    pub embedding: EmbeddingConfig,
    pub augmentation: AugmentationConfig,
    pub ppo: PpoConfig,
    pub schedule: ScheduleConfig,
    pub paths: PathsConfig,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<ExperimentConfig, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    /// Content hash over the canonical JSON form.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self).expect("config serialization"));
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ExperimentConfig::from_json(r#"{"master_sed": 3}"#).unwrap_err();
        assert!(err.to_string().contains("master_sed"));
        assert!(ExperimentConfig::from_json(r#"{"world": {"grid_widht": 24}}"#).is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"master_seed": 42}"#).unwrap();
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.schedule.workers, 8);
        assert_eq!(cfg.schedule.rollout_len, 192);
    }

    #[test]
    fn augmentation_toggle_changes_hash() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.augmentation.enabled = true;
        assert_ne!(a.hash(), b.hash());
    }
}
