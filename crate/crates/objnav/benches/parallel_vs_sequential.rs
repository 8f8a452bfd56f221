//! Compares the data-parallel and sequential execution paths on the two hot
//! loops: evaluation episodes and raycast observation batches. Build with
//! `--no-default-features` to force the library itself onto the sequential
//! path; this bench additionally calls the always-sequential helpers so both
//! paths are measurable from one build.

use criterion::{criterion_group, criterion_main, Criterion};
use objnav::evalsuite::{build_episode_set, TestSetKind};
use objnav::exec;
use objnav::harness::{
    build_scenes, run_episode, EvalContext, EvalPolicy, ExperimentConfig,
};
use objnav::world::{render_rays, AgentPose, ColorAssignment};
use std::sync::Arc;

fn eval_context() -> (EvalContext, Vec<objnav::evalsuite::EpisodeSpec>) {
    let config = ExperimentConfig::default();
    let provider = objnav::harness::build_provider(&config).unwrap();
    let scenes = build_scenes(
        &config.schedule.eval_layout_seeds,
        (config.world.grid_width, config.world.grid_height),
        ColorAssignment::TRAINING,
    )
    .unwrap();
    let standardizer = objnav::augmentation::Standardizer::new(provider.dim());
    let ctx = EvalContext::new(provider, standardizer, scenes, config.world.clone()).unwrap();
    let specs =
        build_episode_set(&config.schedule.eval_layout_seeds, TestSetKind::Zero, 45, 9).unwrap();
    (ctx, specs)
}

fn bench_eval(c: &mut Criterion) {
    let (ctx, specs) = eval_context();
    let mut group = c.benchmark_group("oracle_eval_45_episodes");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let results = exec::map_collect(&specs, |spec| {
                let mut policy = EvalPolicy::Oracle;
                run_episode(&ctx, spec, &mut policy).unwrap()
            });
            assert_eq!(results.len(), specs.len());
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let results = exec::map_collect_seq(&specs, |spec| {
                let mut policy = EvalPolicy::Oracle;
                run_episode(&ctx, spec, &mut policy).unwrap()
            });
            assert_eq!(results.len(), specs.len());
        })
    });
    group.finish();
}

fn bench_raycast(c: &mut Criterion) {
    let scene = build_scenes(&[3], (24, 24), ColorAssignment::TRAINING)
        .unwrap()
        .remove(0);
    let poses: Vec<AgentPose> = (0..512)
        .map(|i| AgentPose {
            x: 1.0 + (i % 16) as f64 * 0.25,
            y: 1.0 + (i / 32) as f64 * 0.25,
            heading: (i * 23 % 360) as f64,
            pitch: 0,
        })
        .collect();
    let house = Arc::clone(&scene.house);
    let mut group = c.benchmark_group("raycast_512_poses");
    group.bench_function("parallel", |b| {
        b.iter(|| exec::map_collect(&poses, |p| render_rays(p, &house, 15, 5.0)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| exec::map_collect_seq(&poses, |p| render_rays(p, &house, 15, 5.0)))
    });
    group.finish();
}

criterion_group!(benches, bench_eval, bench_raycast);
criterion_main!(benches);
