//! Experiment orchestration: configuration, training, evaluation, inspection
//! commands, and persistence.

mod checkpoint;
mod config;
mod eval;
mod policies;
mod scene;
mod train;

pub use checkpoint::{Checkpoint, RunManifest, ValidationEntry, WorkerCheckpoint, CHECKPOINT_VERSION};
pub use config::{
    AugmentationConfig, EmbeddingConfig, ExperimentConfig, PathsConfig, ScheduleConfig, WorldConfig,
};
pub use eval::{goal_embeddings, run_episode, run_specs, EvalContext};
pub use policies::{EvalPolicy, NetPolicy, PolicyKind};
pub use scene::{build_scenes, Scene};
pub use train::{cmd_train, IterationStats, Trainer};

use crate::agent::{
    compute_gae, ppo_loss_and_grads, sample_action, AgentError, PolicyParams, PpoConfig,
    RolloutBuffer, Transition, WorkerRollout,
};
use crate::augmentation::{AugmentError, Standardizer};
use crate::embedding::{load_external_provider, EmbedError, EmbeddingProvider, SyntheticProvider};
use crate::evalsuite::{
    build_episode_set, classify_deceptive, enumerate_assignments, report, report_to_csv,
    results_to_jsonl, DeceptionLabel, EpisodeResult, EvalError, MetricsReport, TestSetKind,
};
use crate::world::{ColorAssignment, RoomKind, WorldError};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config hash mismatch on resume: expected {expected}, checkpoint has {found}")]
    ConfigHashMismatch { expected: String, found: String },
    #[error("training and evaluation layout seeds overlap: {0:?}")]
    LayoutOverlap(Vec<u64>),
    #[error("checkpoint expects input dimension {expected}, provider yields {found}")]
    ProviderDimMismatch { expected: usize, found: usize },
    #[error("no scene with layout id {0}")]
    MissingScene(u64),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("{0}")]
    BadArg(String),
}

impl HarnessError {
    /// CLI exit code: 2 for I/O trouble, 1 for contract violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io(_) | HarnessError::Json(_) => 2,
            _ => 1,
        }
    }
}

pub fn build_provider(
    config: &ExperimentConfig,
) -> Result<Arc<dyn EmbeddingProvider>, HarnessError> {
    match config.embedding.provider.as_str() {
        "synthetic" => Ok(Arc::new(SyntheticProvider::new(
            config.embedding.dim,
            config.world.k_rays,
            config.embedding.provider_seed,
            config.embedding.noise_sigma,
        )?)),
        "external" => {
            let path = config.embedding.external_path.as_ref().ok_or_else(|| {
                HarnessError::BadArg("external provider needs embedding.external_path".into())
            })?;
            Ok(Arc::new(load_external_provider(Path::new(path))?))
        }
        other => Err(HarnessError::BadArg(format!("unknown embedding provider {other:?}"))),
    }
}

/// Report document written by `cmd_eval`; carries the config hash for
/// provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalDocument {
    pub config_hash: String,
    pub policy: String,
    pub episodes: usize,
    pub report: MetricsReport,
}

const EVAL_SEED_XOR: u64 = 0x6576616c;

/// Evaluate a policy on the held-out layouts over the requested test sets,
/// writing results JSONL, a report JSON, and CSV plot data into `out_dir`.
pub fn cmd_eval(
    checkpoint: Option<&Path>,
    config_fallback: Option<ExperimentConfig>,
    test_sets: &[TestSetKind],
    episodes_per_set: usize,
    policy_kind: PolicyKind,
    out_dir: &Path,
) -> Result<(Vec<EpisodeResult>, MetricsReport), HarnessError> {
    let (config, params, standardizer) = match checkpoint {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            (ckpt.config, Some(ckpt.params), ckpt.standardizer.frozen_copy())
        }
        None => {
            let config = config_fallback.unwrap_or_default();
            let dim = config.embedding.dim;
            (config, None, Standardizer::new(dim).frozen_copy())
        }
    };
    let provider = build_provider(&config)?;
    if let Some(p) = &params {
        if p.in_dim != 2 * provider.dim() {
            return Err(HarnessError::ProviderDimMismatch {
                expected: p.in_dim,
                found: 2 * provider.dim(),
            });
        }
    }
    let prototype = match policy_kind {
        PolicyKind::Net => {
            let p = params.ok_or_else(|| {
                HarnessError::BadArg("policy 'net' needs a checkpoint".into())
            })?;
            EvalPolicy::net(Arc::new(p))
        }
        PolicyKind::Oracle => EvalPolicy::Oracle,
        PolicyKind::Random => {
            EvalPolicy::Random(ChaCha8Rng::seed_from_u64(config.master_seed))
        }
        PolicyKind::NeverDone => EvalPolicy::NeverDone,
    };
    let grid = (config.world.grid_width, config.world.grid_height);
    let scenes = build_scenes(&config.schedule.eval_layout_seeds, grid, ColorAssignment::TRAINING)?;
    let ctx = EvalContext::new(provider, standardizer, scenes, config.world.clone())?;
    let mut results = Vec::new();
    for (i, &set) in test_sets.iter().enumerate() {
        let specs = build_episode_set(
            &config.schedule.eval_layout_seeds,
            set,
            episodes_per_set,
            config.master_seed ^ EVAL_SEED_XOR ^ (i as u64),
        )?;
        results.extend(run_specs(&ctx, &specs, &prototype)?);
    }
    let rep = report(&results);
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("results.jsonl"), results_to_jsonl(&results))?;
    let doc = EvalDocument {
        config_hash: config.hash(),
        policy: format!("{policy_kind:?}").to_lowercase(),
        episodes: results.len(),
        report: rep.clone(),
    };
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&doc)?)?;
    std::fs::write(out_dir.join("plots.csv"), report_to_csv(&rep))?;
    Ok((results, rep))
}

/// Assignment table for one target room and test set.
pub fn cmd_enumerate(
    room: RoomKind,
    set: TestSetKind,
) -> Vec<(ColorAssignment, DeceptionLabel)> {
    enumerate_assignments(room, set)
        .into_iter()
        .map(|a| (a, classify_deceptive(a, room)))
        .collect()
}

/// Convert a report JSON written by `cmd_eval` into the flat plot CSV.
pub fn cmd_export_plots(report_path: &Path, csv_path: &Path) -> Result<(), HarnessError> {
    let doc: EvalDocument = serde_json::from_str(&std::fs::read_to_string(report_path)?)?;
    std::fs::write(csv_path, report_to_csv(&doc.report))?;
    Ok(())
}

/// Analytic-vs-finite-difference check of the PPO loss gradient on a tiny
/// recurrent network. `corrupt` perturbs the analytic gradient to prove the
/// check can fail.
pub fn cmd_gradcheck(corrupt: bool) -> Result<f64, HarnessError> {
    let cfg = PpoConfig { hidden: 4, ..Default::default() };
    let params = PolicyParams::init(6, cfg.hidden, 11);
    let buffer = gradcheck_buffer(&params, 2, 8, 13, &cfg);
    let (_, grads) = ppo_loss_and_grads(&params, &buffer, &cfg, true)?;
    let mut analytic = grads.expect("gradients requested").flat();
    if corrupt {
        analytic[0] += 1e-2;
    }
    let flat = params.flat();
    let eps = 1e-5;
    let mut probe = params.clone();
    let mut max_rel = 0.0f64;
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += eps;
        probe.set_flat(&plus);
        let (rp, _) = ppo_loss_and_grads(&probe, &buffer, &cfg, false)?;
        let mut minus = flat.clone();
        minus[i] -= eps;
        probe.set_flat(&minus);
        let (rm, _) = ppo_loss_and_grads(&probe, &buffer, &cfg, false)?;
        let fd = (rp.total - rm.total) / (2.0 * eps);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        max_rel = max_rel.max((analytic[i] - fd).abs() / denom);
    }
    Ok(max_rel)
}

/// Self-consistent synthetic rollout buffer: log-probs and values come from
/// the checked parameters themselves.
fn gradcheck_buffer(
    params: &PolicyParams,
    n_workers: usize,
    t_len: usize,
    seed: u64,
    cfg: &PpoConfig,
) -> RolloutBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs_dim = params.in_dim - 2;
    let mut workers = Vec::new();
    for _ in 0..n_workers {
        let mut h = Array1::zeros(params.hidden);
        let h0 = h.clone();
        let mut transitions = Vec::new();
        for t in 0..t_len {
            let obs: Array1<f64> = Array1::from_shape_fn(obs_dim, |_| rng.gen_range(-1.0..1.0));
            let goal: Array1<f64> = Array1::from_shape_fn(2, |_| rng.gen_range(-1.0..1.0));
            let (logits, value, h_next) = params.forward(&obs, &goal, &h);
            let (action, log_prob) = sample_action(&logits, &mut rng);
            let done = t == t_len - 1 || rng.gen_bool(0.1);
            transitions.push(Transition {
                obs_embedding: obs,
                goal_embedding: goal,
                hidden_in: h.clone(),
                action,
                log_prob,
                value,
                reward: rng.gen_range(-0.1..1.0),
                done,
                geodesic_before: 0.0,
                geodesic_after: 0.0,
            });
            h = if done { Array1::zeros(params.hidden) } else { h_next };
        }
        workers.push(WorkerRollout {
            transitions,
            h0,
            bootstrap_value: 0.0,
            advantages: Vec::new(),
            returns: Vec::new(),
        });
    }
    let mut buffer = RolloutBuffer { workers };
    compute_gae(&mut buffer, cfg.gamma, cfg.gae_lambda);
    buffer
}
