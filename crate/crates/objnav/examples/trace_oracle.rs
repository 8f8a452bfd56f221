//! Replays evaluation episodes with the oracle policy and prints a step trace
//! for failures. Debugging aid, not part of the public surface.

use objnav::evalsuite::{build_episode_set, TestSetKind};
use objnav::harness::{build_provider, build_scenes, EvalContext, EvalPolicy};
use objnav::world::{
    check_success, render_rays, sample_start_pose, ColorAssignment, EpisodeState,
};
use objnav::harness::ExperimentConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    // with a checkpoint argument, adopt its config/standardizer/params
    let ckpt = std::env::args()
        .nth(2)
        .map(|p| objnav::harness::Checkpoint::load(std::path::Path::new(&p)).unwrap());
    let config = ckpt
        .as_ref()
        .map(|c| c.config.clone())
        .unwrap_or_default();
    let provider = build_provider(&config).unwrap();
    let scenes = build_scenes(
        &config.schedule.eval_layout_seeds,
        (config.world.grid_width, config.world.grid_height),
        ColorAssignment::TRAINING,
    )
    .unwrap();
    let standardizer = ckpt
        .as_ref()
        .map(|c| c.standardizer.frozen_copy())
        .unwrap_or_else(|| objnav::augmentation::Standardizer::new(provider.dim()).frozen_copy());
    let ctx = EvalContext::new(provider, standardizer, scenes, config.world.clone()).unwrap();
    let specs = build_episode_set(
        &config.schedule.eval_layout_seeds,
        TestSetKind::Zero,
        90,
        config.master_seed ^ 0x6576616c,
    )
    .unwrap();
    let verbose: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(usize::MAX);
    // optional checkpoint: trace the greedy network instead of the oracle
    let net_params = ckpt.as_ref().map(|c| std::sync::Arc::new(c.params.clone()));
    let mut action_counts_near = std::collections::BTreeMap::new();
    let mut action_counts_far = std::collections::BTreeMap::new();
    let mut pitch_down_near = 0usize;
    let mut near_steps = 0usize;
    let mut fail_idx = 0usize;
    for (i, spec) in specs.iter().enumerate() {
        let scene = ctx.scene(spec.layout_id).unwrap().with_colors(spec.colors);
        let field = scene.field(spec.target);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.start_pose_seed);
        let pose =
            sample_start_pose(&scene.house, &field, ctx.world.start_min_geodesic, &mut rng)
                .unwrap();
        let mut env = EpisodeState::new(scene.house.clone(), field, spec.target, pose)
            .with_actuation_noise(ctx.world.actuation_noise);
        let mut policy = match &net_params {
            Some(p) => EvalPolicy::net(p.clone()),
            None => EvalPolicy::Oracle,
        };
        let mut trace = Vec::new();
        loop {
            let obs = render_rays(&env.pose, &scene.house, ctx.world.k_rays, ctx.world.max_range);
            let emb = ctx.provider.embed_observation(&obs, &mut rng).unwrap();
            let obs_input = ctx.standardizer.apply(&emb);
            let goal = &ctx.goal_embeddings[spec.target.index()];
            let action = policy.act(&env, &obs_input, goal);
            trace.push((env.pose.clone(), action));
            let near = env.geodesic_now() <= 1.0;
            let counts = if near { &mut action_counts_near } else { &mut action_counts_far };
            *counts.entry(format!("{action:?}")).or_insert(0usize) += 1;
            if near {
                near_steps += 1;
                if env.pose.pitch == -30 {
                    pitch_down_near += 1;
                }
            }
            if env.step(action, &mut rng) {
                break;
            }
        }
        let ok = check_success(&env);
        if !ok {
            println!(
                "episode {i}: layout {} target {:?} steps {} dtt {:.2} plen {:.2}",
                spec.layout_id,
                spec.target,
                env.t,
                env.geodesic_now(),
                env.path_traveled
            );
            if fail_idx == verbose {
                let obj = scene.house.object(spec.target);
                println!("object at cell {:?}", obj.cell);
                for (t, (p, a)) in trace.iter().enumerate() {
                    if t < 80 || t % 50 == 0 {
                        println!(
                            "  t={t:3} x={:.3} y={:.3} h={:7.2} pitch={:3} cell=({},{}) geo={:.2} act={:?}",
                            p.x,
                            p.y,
                            p.heading,
                            p.pitch,
                            (p.x / 0.25) as usize,
                            (p.y / 0.25) as usize,
                            env.field.at(((p.x / 0.25) as usize, (p.y / 0.25) as usize)),
                            a
                        );
                    }
                }
            }
            fail_idx += 1;
        }
    }
    println!("{fail_idx} failures");
    println!("actions near target (geodesic <= 1m): {action_counts_near:?}");
    println!("actions far from target: {action_counts_far:?}");
    println!(
        "near-target steps at pitch -30: {pitch_down_near}/{near_steps}"
    );
}
