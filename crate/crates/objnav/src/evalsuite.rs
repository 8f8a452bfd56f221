//! Out-of-distribution test sets over wall-color reassignments, deception
//! labeling, episode distribution, and navigation metrics.

use crate::world::{ColorAssignment, ObjectCategory, RoomKind, WallColor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{total} episodes not divisible by {divisor} (targets x layouts x assignments): remainder {remainder}")]
    Indivisible { total: usize, divisor: usize, remainder: usize },
    #[error("episode {index} has non-positive shortest path {value}")]
    NonPositiveShortestPath { index: usize, value: f64 },
}

/// Number of rooms whose wall color differs from the training assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestSetKind {
    Zero,
    One,
    Two,
    Three,
}

impl TestSetKind {
    pub const ALL: [TestSetKind; 4] =
        [TestSetKind::Zero, TestSetKind::One, TestSetKind::Two, TestSetKind::Three];

    /// Number of color assignments enumerated per target room.
    pub fn assignments_per_target(self) -> usize {
        match self {
            TestSetKind::Zero => 1,
            TestSetKind::One => 2,
            TestSetKind::Two | TestSetKind::Three => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestSetKind::Zero => "zero",
            TestSetKind::One => "one",
            TestSetKind::Two => "two",
            TestSetKind::Three => "three",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeceptionLabel {
    Deceptive,
    Nondeceptive,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub layout_id: u64,
    pub colors: ColorAssignment,
    pub target: ObjectCategory,
    pub start_pose_seed: u64,
    pub test_set: TestSetKind,
    pub deception: DeceptionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub spec: EpisodeSpec,
    pub success: bool,
    /// Distance actually traveled, meters.
    pub path_length: f64,
    /// Geodesic shortest path from the start pose to the success region,
    /// meters. Strictly positive.
    pub shortest_path: f64,
    /// Geodesic distance to target at the final pose, meters.
    pub dtt: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub success_rate: f64,
    pub spl: f64,
    pub mean_dtt: f64,
    pub mean_episode_length: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub overall: GroupMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deceptive: Option<GroupMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nondeceptive: Option<GroupMetrics>,
}

/// Metrics keyed by test set, each with overall and per-deception-group
/// aggregates. Empty groups are omitted rather than zero-filled.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sets: BTreeMap<TestSetKind, SetReport>,
}

fn other_colors(training: WallColor) -> [WallColor; 2] {
    let mut it = WallColor::ALL.iter().copied().filter(|c| *c != training);
    [it.next().unwrap(), it.next().unwrap()]
}

/// All color assignments for a test set, relative to the target's home room.
/// Zero keeps training colors; One recolors only the target room; Two
/// recolors the target room and exactly one other room; Three recolors all
/// rooms. Ordered lexicographically; duplicates are impossible by
/// construction.
pub fn enumerate_assignments(target_room: RoomKind, k: TestSetKind) -> Vec<ColorAssignment> {
    let training = ColorAssignment::TRAINING;
    let mut out = Vec::new();
    match k {
        TestSetKind::Zero => out.push(training),
        TestSetKind::One => {
            for c in other_colors(training.color_of(target_room)) {
                out.push(training.with_color(target_room, c));
            }
        }
        TestSetKind::Two => {
            let others: Vec<RoomKind> = RoomKind::ALL
                .iter()
                .copied()
                .filter(|r| *r != target_room)
                .collect();
            for tc in other_colors(training.color_of(target_room)) {
                for &room in &others {
                    for oc in other_colors(training.color_of(room)) {
                        out.push(
                            training.with_color(target_room, tc).with_color(room, oc),
                        );
                    }
                }
            }
        }
        TestSetKind::Three => {
            for kc in other_colors(training.kitchen) {
                for bc in other_colors(training.bedroom) {
                    for lc in other_colors(training.living_room) {
                        out.push(ColorAssignment {
                            kitchen: kc,
                            bedroom: bc,
                            living_room: lc,
                        });
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Deceptive iff some non-target room wears the color the target room had
/// during training; Nondeceptive iff that never happens but at least one
/// non-target room changed; NotApplicable when no non-target room changed.
pub fn classify_deceptive(a: ColorAssignment, target_room: RoomKind) -> DeceptionLabel {
    let training = ColorAssignment::TRAINING;
    let learned = training.color_of(target_room);
    let mut any_nontarget_change = false;
    for room in RoomKind::ALL {
        if room == target_room {
            continue;
        }
        if a.color_of(room) == learned {
            return DeceptionLabel::Deceptive;
        }
        if a.color_of(room) != training.color_of(room) {
            any_nontarget_change = true;
        }
    }
    if any_nontarget_change {
        DeceptionLabel::Nondeceptive
    } else {
        DeceptionLabel::NotApplicable
    }
}

/// Evenly distribute `total` episodes over the 9 targets, the given layouts,
/// and the per-target color assignments of test set `k`. Start-pose seeds are
/// drawn deterministically from `seed` in enumeration order.
pub fn build_episode_set(
    layout_ids: &[u64],
    k: TestSetKind,
    total: usize,
    seed: u64,
) -> Result<Vec<EpisodeSpec>, EvalError> {
    let divisor = ObjectCategory::ALL.len() * layout_ids.len() * k.assignments_per_target();
    if divisor == 0 || total % divisor != 0 {
        return Err(EvalError::Indivisible {
            total,
            divisor,
            remainder: if divisor == 0 { total } else { total % divisor },
        });
    }
    let per_combo = total / divisor;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(total);
    for target in ObjectCategory::ALL {
        let assignments = enumerate_assignments(target.home_room(), k);
        for &layout_id in layout_ids {
            for &colors in &assignments {
                let deception = classify_deceptive(colors, target.home_room());
                for _ in 0..per_combo {
                    specs.push(EpisodeSpec {
                        layout_id,
                        colors,
                        target,
                        start_pose_seed: rng.gen(),
                        test_set: k,
                        deception,
                    });
                }
            }
        }
    }
    Ok(specs)
}

/// Success weighted by normalized inverse path length:
/// (1/N) Σ S_i · l_i / max(p_i, l_i).
pub fn spl(results: &[EpisodeResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (i, r) in results.iter().enumerate() {
        if r.shortest_path <= 0.0 {
            return Err(EvalError::NonPositiveShortestPath { index: i, value: r.shortest_path });
        }
        if r.success {
            sum += r.shortest_path / r.path_length.max(r.shortest_path);
        }
    }
    Ok(sum / results.len() as f64)
}

fn group_metrics(results: &[&EpisodeResult]) -> GroupMetrics {
    let n = results.len() as f64;
    let owned: Vec<EpisodeResult> = results.iter().map(|r| **r).collect();
    GroupMetrics {
        success_rate: results.iter().filter(|r| r.success).count() as f64 / n,
        spl: spl(&owned).expect("shortest paths validated by EpisodeResult invariant"),
        mean_dtt: results.iter().map(|r| r.dtt).sum::<f64>() / n,
        mean_episode_length: results.iter().map(|r| r.steps as f64).sum::<f64>() / n,
        episodes: results.len(),
    }
}

/// Aggregate results per test set, overall and split by deception label.
pub fn report(results: &[EpisodeResult]) -> MetricsReport {
    let mut by_set: BTreeMap<TestSetKind, Vec<&EpisodeResult>> = BTreeMap::new();
    for r in results {
        by_set.entry(r.spec.test_set).or_default().push(r);
    }
    let mut sets = BTreeMap::new();
    for (k, rs) in by_set {
        let deceptive: Vec<&EpisodeResult> = rs
            .iter()
            .copied()
            .filter(|r| r.spec.deception == DeceptionLabel::Deceptive)
            .collect();
        let nondeceptive: Vec<&EpisodeResult> = rs
            .iter()
            .copied()
            .filter(|r| r.spec.deception == DeceptionLabel::Nondeceptive)
            .collect();
        sets.insert(
            k,
            SetReport {
                overall: group_metrics(&rs),
                deceptive: (!deceptive.is_empty()).then(|| group_metrics(&deceptive)),
                nondeceptive: (!nondeceptive.is_empty()).then(|| group_metrics(&nondeceptive)),
            },
        );
    }
    MetricsReport { sets }
}

/// One JSON object per result per line.
pub fn results_to_jsonl(results: &[EpisodeResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r).expect("result serialization"));
        out.push('\n');
    }
    out
}

/// Flat CSV (test_set, group, metric, value) for external plotting.
pub fn report_to_csv(report: &MetricsReport) -> String {
    let mut out = String::from("test_set,group,metric,value\n");
    let push_group = |set: TestSetKind, group: &str, m: &GroupMetrics, out: &mut String| {
        for (name, value) in [
            ("success_rate", m.success_rate),
            ("spl", m.spl),
            ("mean_dtt", m.mean_dtt),
            ("mean_episode_length", m.mean_episode_length),
            ("episodes", m.episodes as f64),
        ] {
            out.push_str(&format!("{},{},{},{}\n", set.name(), group, name, value));
        }
    };
    for (set, sr) in &report.sets {
        push_group(*set, "overall", &sr.overall, &mut out);
        if let Some(m) = &sr.deceptive {
            push_group(*set, "deceptive", m, &mut out);
        }
        if let Some(m) = &sr.nondeceptive {
            push_group(*set, "nondeceptive", m, &mut out);
        }
    }
    out
}
