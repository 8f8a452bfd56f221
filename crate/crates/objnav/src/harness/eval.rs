//! Evaluation runner: executes episode specs against a policy with identity
//! augmentation and frozen standardization, in parallel with per-episode
//! seeds so throughput never affects results.

use super::config::WorldConfig;
use super::policies::EvalPolicy;
use super::scene::Scene;
use super::HarnessError;
use crate::augmentation::Standardizer;
use crate::embedding::{Embedding, EmbeddingProvider, TextPrompt};
use crate::evalsuite::{EpisodeResult, EpisodeSpec};
use crate::exec;
use crate::world::{check_success, render_rays, sample_start_pose, EpisodeState, ObjectCategory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub struct EvalContext {
    pub provider: Arc<dyn EmbeddingProvider>,
    pub standardizer: Standardizer,
    pub scenes: Vec<Scene>,
    pub world: WorldConfig,
    /// Goal text embeddings indexed by `ObjectCategory::index`.
    pub goal_embeddings: Vec<Embedding>,
}

impl EvalContext {
    pub fn new(
        provider: Arc<dyn EmbeddingProvider>,
        standardizer: Standardizer,
        scenes: Vec<Scene>,
        world: WorldConfig,
    ) -> Result<EvalContext, HarnessError> {
        let goal_embeddings = goal_embeddings(provider.as_ref())?;
        Ok(EvalContext {
            provider,
            standardizer: standardizer.frozen_copy(),
            scenes,
            world,
            goal_embeddings,
        })
    }

    pub fn scene(&self, layout_id: u64) -> Result<&Scene, HarnessError> {
        self.scenes
            .iter()
            .find(|s| s.layout_seed == layout_id)
            .ok_or(HarnessError::MissingScene(layout_id))
    }
}

/// One text embedding per target category, in category order.
pub fn goal_embeddings(provider: &dyn EmbeddingProvider) -> Result<Vec<Embedding>, HarnessError> {
    ObjectCategory::ALL
        .iter()
        .map(|c| provider.embed_text(&TextPrompt::new(c.label())).map_err(HarnessError::from))
        .collect()
}

/// Run one episode to termination. Fully determined by the episode's seed.
pub fn run_episode(
    ctx: &EvalContext,
    spec: &EpisodeSpec,
    policy: &mut EvalPolicy,
) -> Result<EpisodeResult, HarnessError> {
    let scene = ctx.scene(spec.layout_id)?.with_colors(spec.colors);
    let field = scene.field(spec.target);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.start_pose_seed);
    let pose = sample_start_pose(&scene.house, &field, ctx.world.start_min_geodesic, &mut rng)?;
    let mut env = EpisodeState::new(scene.house.clone(), field, spec.target, pose)
        .with_actuation_noise(ctx.world.actuation_noise);
    let shortest_path = env.geodesic_now();
    policy.reset(spec.start_pose_seed);
    let goal = &ctx.goal_embeddings[spec.target.index()];
    loop {
        let obs = render_rays(&env.pose, &scene.house, ctx.world.k_rays, ctx.world.max_range);
        let emb = ctx.provider.embed_observation(&obs, &mut rng)?;
        let obs_input = ctx.standardizer.apply(&emb);
        let action = policy.act(&env, &obs_input, goal);
        if env.step(action, &mut rng) {
            break;
        }
    }
    Ok(EpisodeResult {
        spec: *spec,
        success: check_success(&env),
        path_length: env.path_traveled,
        shortest_path,
        dtt: env.geodesic_now(),
        steps: env.t,
    })
}

/// Run all specs, each with a fresh copy of the policy prototype.
pub fn run_specs(
    ctx: &EvalContext,
    specs: &[EpisodeSpec],
    prototype: &EvalPolicy,
) -> Result<Vec<EpisodeResult>, HarnessError> {
    exec::map_collect(specs, |spec| {
        let mut policy = prototype.clone();
        run_episode(ctx, spec, &mut policy)
    })
    .into_iter()
    .collect()
}
