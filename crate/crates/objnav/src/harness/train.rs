//! Training orchestration: parallel rollout workers with per-worker rng
//! streams, a single-batch PPO update, periodic validation on a held-out
//! Zero-set slice, and best-validation-SPL checkpoint selection.

use super::checkpoint::{
    Checkpoint, RunManifest, ValidationEntry, WorkerCheckpoint, CHECKPOINT_VERSION,
};
use super::config::ExperimentConfig;
use super::eval::{goal_embeddings, run_specs, EvalContext};
use super::policies::EvalPolicy;
use super::scene::{build_scenes, Scene};
use super::{build_provider, HarnessError};
use crate::agent::{
    compute_gae, compute_reward, ppo_update, sample_action, Adam, PolicyParams, RolloutBuffer,
    Transition, WorkerRollout, REWARD_SLACK, REWARD_SUCCESS,
};
use crate::augmentation::{augment, build_delta_set, AugmentConfig, AugmentMode, DeltaSet, Standardizer};
use crate::embedding::{Embedding, EmbeddingProvider, TextPrompt};
use crate::evalsuite::{build_episode_set, report, TestSetKind};
use crate::exec;
use crate::world::{
    check_success, render_rays, sample_start_pose, Action, ColorAssignment, EpisodeState,
    ObjectCategory,
};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

/// Stream offset separating worker rngs from other consumers of the master
/// seed.
const WORKER_STREAM_BASE: u64 = 1000;
/// Seed tweak for the fixed validation episode set.
const VALIDATION_SEED_XOR: u64 = 0x76616c6964;

struct Worker {
    rng: ChaCha8Rng,
    scene_idx: usize,
    env: EpisodeState,
    hidden: Array1<f64>,
}

struct RolloutOut {
    rollout: WorkerRollout,
    /// Augmented (pre-standardization) observation embeddings, for the
    /// learner-side standardizer update.
    raw_embeddings: Vec<Embedding>,
    episodes_done: usize,
    successes: usize,
    reward_sum: f64,
}

pub struct IterationStats {
    pub frames: u64,
    pub episodes_done: usize,
    pub successes: usize,
    pub mean_reward_per_step: f64,
    pub loss_total: f64,
    pub entropy: f64,
}

pub struct Trainer {
    pub config: ExperimentConfig,
    provider: Arc<dyn EmbeddingProvider>,
    delta_set: Option<DeltaSet>,
    goal_embeddings: Vec<Embedding>,
    train_scenes: Vec<Scene>,
    eval_scenes: Vec<Scene>,
    pub params: PolicyParams,
    pub optimizer: Adam,
    pub standardizer: Standardizer,
    workers: Vec<Worker>,
    pub frames: u64,
    pub validations: Vec<ValidationEntry>,
    pub best: Option<ValidationEntry>,
}

fn spawn_episode(
    scenes: &[Scene],
    config: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, EpisodeState), HarnessError> {
    let scene_idx = rng.gen_range(0..scenes.len());
    let target = ObjectCategory::ALL[rng.gen_range(0..ObjectCategory::ALL.len())];
    let scene = &scenes[scene_idx];
    let field = scene.field(target);
    let pose = sample_start_pose(&scene.house, &field, config.world.start_min_geodesic, rng)?;
    let env = EpisodeState::new(scene.house.clone(), field, target, pose)
        .with_actuation_noise(config.world.actuation_noise);
    Ok((scene_idx, env))
}

fn collect_rollout(
    worker: &mut Worker,
    params: &PolicyParams,
    frozen_std: &Standardizer,
    provider: &dyn EmbeddingProvider,
    delta_set: Option<&DeltaSet>,
    aug_cfg: &AugmentConfig,
    goals: &[Embedding],
    scenes: &[Scene],
    config: &ExperimentConfig,
) -> Result<RolloutOut, HarnessError> {
    let len = config.schedule.rollout_len;
    let h0 = worker.hidden.clone();
    let mut transitions = Vec::with_capacity(len);
    let mut raw_embeddings = Vec::with_capacity(len);
    let mut episodes_done = 0;
    let mut successes = 0;
    let mut reward_sum = 0.0;

    let embed_current = |w: &mut Worker| -> Result<Embedding, HarnessError> {
        let obs =
            render_rays(&w.env.pose, &w.env.house, config.world.k_rays, config.world.max_range);
        let emb = provider.embed_observation(&obs, &mut w.rng)?;
        match delta_set {
            Some(ds) => Ok(augment(&emb, ds, aug_cfg, &mut w.rng)?),
            None => Ok(emb),
        }
    };

    for _ in 0..len {
        let emb = embed_current(worker)?;
        let obs_input = frozen_std.apply(&emb);
        let goal = goals[worker.env.target.index()].clone();
        let (logits, value, h_next) = params.forward(&obs_input, &goal, &worker.hidden);
        let (action_idx, log_prob) = sample_action(&logits, &mut worker.rng);
        let prev_min = worker.env.min_geodesic_so_far;
        let terminated = worker.env.step(Action::from_index(action_idx), &mut worker.rng);
        let success = terminated && check_success(&worker.env);
        let reward = compute_reward(
            prev_min,
            worker.env.geodesic_now(),
            success,
            REWARD_SLACK,
            REWARD_SUCCESS,
        );
        reward_sum += reward;
        transitions.push(Transition {
            obs_embedding: obs_input,
            goal_embedding: goal,
            hidden_in: worker.hidden.clone(),
            action: action_idx,
            log_prob,
            value,
            reward,
            done: terminated,
            geodesic_before: prev_min,
            geodesic_after: worker.env.geodesic_now(),
        });
        raw_embeddings.push(emb);
        if terminated {
            episodes_done += 1;
            successes += usize::from(success);
            let (idx, env) = spawn_episode(scenes, config, &mut worker.rng)?;
            worker.scene_idx = idx;
            worker.env = env;
            worker.hidden.fill(0.0);
        } else {
            worker.hidden = h_next;
        }
    }

    let bootstrap_value = if transitions.last().map(|t| t.done).unwrap_or(true) {
        0.0
    } else {
        let emb = embed_current(worker)?;
        let obs_input = frozen_std.apply(&emb);
        let goal = &goals[worker.env.target.index()];
        let (_, value, _) = params.forward(&obs_input, goal, &worker.hidden);
        value
    };

    Ok(RolloutOut {
        rollout: WorkerRollout {
            transitions,
            h0,
            bootstrap_value,
            advantages: Vec::new(),
            returns: Vec::new(),
        },
        raw_embeddings,
        episodes_done,
        successes,
        reward_sum,
    })
}

impl Trainer {
    pub fn new(config: ExperimentConfig) -> Result<Trainer, HarnessError> {
        check_layout_disjointness(&config)?;
        let provider = build_provider(&config)?;
        let delta_set = build_config_delta_set(&config, provider.as_ref())?;
        let goal_embeddings = goal_embeddings(provider.as_ref())?;
        let grid = (config.world.grid_width, config.world.grid_height);
        let train_scenes =
            build_scenes(&config.schedule.train_layout_seeds, grid, ColorAssignment::TRAINING)?;
        let eval_scenes =
            build_scenes(&config.schedule.eval_layout_seeds, grid, ColorAssignment::TRAINING)?;
        let in_dim = 2 * provider.dim();
        let params = PolicyParams::init(in_dim, config.ppo.hidden, config.master_seed);
        let optimizer = Adam::new(config.ppo.learning_rate, params.n_params());
        let standardizer = Standardizer::new(provider.dim());
        let mut workers = Vec::with_capacity(config.schedule.workers);
        for i in 0..config.schedule.workers {
            let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
            rng.set_stream(WORKER_STREAM_BASE + i as u64);
            let (scene_idx, env) = spawn_episode(&train_scenes, &config, &mut rng)?;
            workers.push(Worker {
                rng,
                scene_idx,
                env,
                hidden: Array1::zeros(config.ppo.hidden),
            });
        }
        Ok(Trainer {
            config,
            provider,
            delta_set,
            goal_embeddings,
            train_scenes,
            eval_scenes,
            params,
            optimizer,
            standardizer,
            workers,
            frames: 0,
            validations: Vec::new(),
            best: None,
        })
    }

    pub fn resume(ckpt: Checkpoint, config: &ExperimentConfig) -> Result<Trainer, HarnessError> {
        let expected = config.hash();
        if ckpt.config_hash != expected {
            return Err(HarnessError::ConfigHashMismatch {
                expected,
                found: ckpt.config_hash,
            });
        }
        let mut trainer = Trainer::new(ckpt.config)?;
        trainer.params = ckpt.params;
        trainer.optimizer = ckpt.optimizer;
        trainer.standardizer = ckpt.standardizer;
        trainer.frames = ckpt.frames;
        trainer.validations = ckpt.validations;
        trainer.best = ckpt.best;
        for (worker, wc) in trainer.workers.iter_mut().zip(ckpt.workers) {
            let scene = &trainer.train_scenes[wc.scene_idx];
            let field = scene.field(wc.episode.target);
            worker.rng = wc.rng;
            worker.scene_idx = wc.scene_idx;
            worker.env = EpisodeState::restore(scene.house.clone(), field, wc.episode);
            worker.hidden = wc.hidden;
        }
        Ok(trainer)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            config_hash: self.config.hash(),
            frames: self.frames,
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            standardizer: self.standardizer.clone(),
            workers: self
                .workers
                .iter()
                .map(|w| WorkerCheckpoint {
                    rng: w.rng.clone(),
                    scene_idx: w.scene_idx,
                    episode: w.env.snapshot(),
                    hidden: w.hidden.clone(),
                })
                .collect(),
            validations: self.validations.clone(),
            best: self.best,
        }
    }

    /// One rollout-plus-update iteration over all workers.
    pub fn train_iteration(&mut self) -> Result<IterationStats, HarnessError> {
        let frozen = self.standardizer.frozen_copy();
        let aug_cfg = AugmentConfig {
            alpha: self.config.augmentation.alpha,
            mode: AugmentMode::TrainSample,
            include_original: self.config.augmentation.include_original,
        };
        let params = &self.params;
        let provider = self.provider.as_ref();
        let delta_set = self.delta_set.as_ref();
        let goals = &self.goal_embeddings;
        let scenes = &self.train_scenes;
        let config = &self.config;
        let mut slots: Vec<(&mut Worker, Option<Result<RolloutOut, HarnessError>>)> =
            self.workers.iter_mut().map(|w| (w, None)).collect();
        exec::for_each_mut(&mut slots, |_, (worker, out)| {
            *out = Some(collect_rollout(
                worker, params, &frozen, provider, delta_set, &aug_cfg, goals, scenes, config,
            ));
        });
        let mut outs = Vec::with_capacity(slots.len());
        for (_, out) in slots {
            outs.push(out.expect("rollout ran")?);
        }

        // standardizer sees raw embeddings in fixed worker order
        for out in &outs {
            for emb in &out.raw_embeddings {
                self.standardizer.observe(emb);
            }
        }

        let episodes_done: usize = outs.iter().map(|o| o.episodes_done).sum();
        let successes: usize = outs.iter().map(|o| o.successes).sum();
        let reward_sum: f64 = outs.iter().map(|o| o.reward_sum).sum();
        let mut buffer = RolloutBuffer {
            workers: outs.into_iter().map(|o| o.rollout).collect(),
        };
        compute_gae(&mut buffer, self.config.ppo.gamma, self.config.ppo.gae_lambda);
        let steps = buffer.total_steps() as u64;
        let reports = ppo_update(&mut self.params, &mut self.optimizer, &buffer, &self.config.ppo)?;
        self.frames += steps;
        let last = reports.last().expect("at least one epoch");
        Ok(IterationStats {
            frames: self.frames,
            episodes_done,
            successes,
            mean_reward_per_step: reward_sum / steps as f64,
            loss_total: last.total,
            entropy: last.entropy,
        })
    }

    /// Validation SPL on the fixed held-out Zero-set slice with the current
    /// parameters and frozen standardizer.
    pub fn validate(&self) -> Result<ValidationEntry, HarnessError> {
        let ctx = EvalContext::new(
            self.provider.clone(),
            self.standardizer.frozen_copy(),
            self.eval_scenes.clone(),
            self.config.world.clone(),
        )?;
        let specs = build_episode_set(
            &self.config.schedule.eval_layout_seeds,
            TestSetKind::Zero,
            self.config.schedule.validation_episodes,
            self.config.master_seed ^ VALIDATION_SEED_XOR,
        )?;
        let proto = EvalPolicy::net(Arc::new(self.params.clone()));
        let results = run_specs(&ctx, &specs, &proto)?;
        let rep = report(&results);
        let overall = rep.sets[&TestSetKind::Zero].overall;
        Ok(ValidationEntry {
            frames: self.frames,
            spl: overall.spl,
            success_rate: overall.success_rate,
        })
    }
}

fn check_layout_disjointness(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let overlap: Vec<u64> = config
        .schedule
        .train_layout_seeds
        .iter()
        .filter(|s| config.schedule.eval_layout_seeds.contains(s))
        .copied()
        .collect();
    if overlap.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::LayoutOverlap(overlap))
    }
}

fn build_config_delta_set(
    config: &ExperimentConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Option<DeltaSet>, HarnessError> {
    if !config.augmentation.enabled {
        return Ok(None);
    }
    let texts = config
        .augmentation
        .labels
        .iter()
        .map(|l| provider.embed_text(&TextPrompt::new(l.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(build_delta_set(&texts)?))
}

/// Train to the configured step budget, validating and checkpointing along
/// the way; resumes from `<out_dir>/last.json` when present.
pub fn cmd_train(config: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    let out_dir = Path::new(&config.paths.out_dir);
    std::fs::create_dir_all(out_dir)?;
    let last_path = out_dir.join("last.json");
    let best_path = out_dir.join("best.json");
    let mut trainer = if last_path.exists() {
        Trainer::resume(Checkpoint::load(&last_path)?, config)?
    } else {
        Trainer::new(config.clone())?
    };
    let started = Instant::now();
    let interval = config.schedule.validation_interval_frames.max(1);
    let mut next_validation = (trainer.frames / interval + 1) * interval;
    trainer.checkpoint().save(&last_path)?;
    while trainer.frames < config.schedule.total_steps {
        let stats = trainer.train_iteration()?;
        println!(
            "frames {:>9}  episodes {:>4}  success {:>3}/{:<4}  reward/step {:+.4}  loss {:+.4}  entropy {:.3}",
            stats.frames,
            stats.episodes_done,
            stats.successes,
            stats.episodes_done,
            stats.mean_reward_per_step,
            stats.loss_total,
            stats.entropy
        );
        if trainer.frames >= next_validation {
            while next_validation <= trainer.frames {
                next_validation += interval;
            }
            let entry = trainer.validate()?;
            println!(
                "validation @ {} frames: success {:.3}, spl {:.3}",
                entry.frames, entry.success_rate, entry.spl
            );
            trainer.validations.push(entry);
            if trainer.best.map_or(true, |b| entry.spl > b.spl) {
                trainer.best = Some(entry);
                trainer.checkpoint().save(&best_path)?;
            }
            trainer.checkpoint().save(&last_path)?;
        }
    }
    trainer.checkpoint().save(&last_path)?;
    if trainer.best.is_none() {
        // no validation ever ran; the final weights are the selection
        trainer.checkpoint().save(&best_path)?;
    }
    let manifest = RunManifest {
        config_hash: config.hash(),
        version: CHECKPOINT_VERSION,
        frames: trainer.frames,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        checkpoints: trainer.validations.clone(),
        best: trainer.best,
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
