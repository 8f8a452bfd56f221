//! Evaluation policies: the trained network (greedy), a geodesic-following
//! oracle, a uniform-random floor, and a never-Done probe.

use crate::agent::{argmax_action, PolicyParams};
use crate::world::{
    angle_diff, cell_center, position_clear, segment_blocked, Action, AgentPose, EpisodeState,
    SizeClass, FOV_DEG, STEP_MEAN, SUCCESS_RADIUS,
};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::world::signed_angle_diff;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Net,
    Oracle,
    Random,
    NeverDone,
}

impl PolicyKind {
    pub fn parse(s: &str) -> Option<PolicyKind> {
        match s {
            "net" => Some(PolicyKind::Net),
            "oracle" => Some(PolicyKind::Oracle),
            "random" => Some(PolicyKind::Random),
            "never-done" => Some(PolicyKind::NeverDone),
            _ => None,
        }
    }
}

#[derive(Clone)]
pub enum EvalPolicy {
    Net(NetPolicy),
    Oracle,
    Random(ChaCha8Rng),
    NeverDone,
}

impl EvalPolicy {
    pub fn net(params: Arc<PolicyParams>) -> EvalPolicy {
        let hidden = Array1::zeros(params.hidden);
        EvalPolicy::Net(NetPolicy { params, hidden })
    }

    pub fn reset(&mut self, seed: u64) {
        match self {
            EvalPolicy::Net(p) => p.hidden.fill(0.0),
            EvalPolicy::Random(rng) => *rng = ChaCha8Rng::seed_from_u64(seed),
            EvalPolicy::Oracle | EvalPolicy::NeverDone => {}
        }
    }

    pub fn act(
        &mut self,
        env: &EpisodeState,
        obs_input: &Array1<f64>,
        goal_input: &Array1<f64>,
    ) -> Action {
        match self {
            EvalPolicy::Net(p) => p.act(obs_input, goal_input),
            EvalPolicy::Oracle => oracle_act(env),
            EvalPolicy::Random(rng) => Action::from_index(rng.gen_range(0..Action::ALL.len())),
            EvalPolicy::NeverDone => Action::RotateLeft,
        }
    }
}

#[derive(Clone)]
pub struct NetPolicy {
    pub params: Arc<PolicyParams>,
    hidden: Array1<f64>,
}

impl NetPolicy {
    fn act(&mut self, obs_input: &Array1<f64>, goal_input: &Array1<f64>) -> Action {
        let (logits, _, h) = self.params.forward(obs_input, goal_input, &self.hidden);
        self.hidden = h;
        Action::from_index(argmax_action(&logits))
    }
}

/// Rotate toward a desired absolute heading, or move when already within one
/// rotation step of it.
fn steer(pose: &AgentPose, theta: f64) -> Action {
    let sd = signed_angle_diff(pose.heading, theta);
    if sd.abs() <= 15.0 + 1e-9 {
        Action::MoveAhead
    } else if sd > 0.0 {
        Action::RotateRight
    } else {
        Action::RotateLeft
    }
}

/// Geodesic-following oracle: descend the target's distance field over
/// candidate headings, then face the object and issue Done once inside the
/// success region with line of sight.
fn oracle_act(env: &EpisodeState) -> Action {
    let house = &env.house;
    let layout = &house.layout;
    let obj = house.object(env.target);
    let (ox, oy) = cell_center(obj.cell);
    let (px, py) = (env.pose.x, env.pose.y);
    let dist = ((ox - px).powi(2) + (oy - py).powi(2)).sqrt();
    let los = !segment_blocked(layout, (px, py), (ox, oy));
    if dist <= SUCCESS_RADIUS && los {
        if obj.category.size_class() == SizeClass::Small && env.pose.pitch != -30 {
            return Action::LookDown;
        }
        if obj.category.size_class() == SizeClass::Large && env.pose.pitch > 0 {
            return Action::LookDown;
        }
        let bearing = (oy - py).atan2(ox - px).to_degrees();
        if angle_diff(bearing, env.pose.heading) <= FOV_DEG / 2.0 {
            return Action::Done;
        }
        return steer(&env.pose, bearing);
    }

    // Score the 12 headings reachable by rotation from the current one by the
    // field value after one or two straight steps; break ties toward the
    // object, then by turn cost. Scoring on the reachable lattice matters:
    // MoveAhead travels along the actual heading, so the clearance probe must
    // use the heading that will actually be executed.
    let clear_step = |theta_rad: f64, s: f64| -> Option<(f64, f64)> {
        let p = (px + s * theta_rad.cos(), py + s * theta_rad.sin());
        let m = (px + s / 2.0 * theta_rad.cos(), py + s / 2.0 * theta_rad.sin());
        (position_clear(layout, p) && position_clear(layout, m)).then_some(p)
    };
    let field_at = |p: (f64, f64)| {
        env.field.at((
            (p.0 / crate::world::CELL_SIZE).floor() as usize,
            (p.1 / crate::world::CELL_SIZE).floor() as usize,
        ))
    };
    let mut best: Option<(f64, f64, f64, i32)> = None; // (field, obj dist, turn, k)
    for k in 0..12i32 {
        let theta = (env.pose.heading + k as f64 * 30.0).rem_euclid(360.0);
        let rad = theta.to_radians();
        let Some(p1) = clear_step(rad, STEP_MEAN) else { continue };
        let f1 = field_at(p1);
        let score = match clear_step(rad, 2.0 * STEP_MEAN) {
            // the 3/2-step midpoint of the second move is p1-adjacent and
            // checked when that move is actually taken
            Some(p2) if position_clear(layout, (
                px + 1.5 * STEP_MEAN * rad.cos(),
                py + 1.5 * STEP_MEAN * rad.sin(),
            )) =>
            {
                f1.min(field_at(p2))
            }
            _ => f1,
        };
        let obj_dist = ((ox - p1.0).powi(2) + (oy - p1.1).powi(2)).sqrt();
        let turn = k.min(12 - k) as f64;
        let cand = (score, obj_dist, turn, k);
        let better = match best {
            None => true,
            Some(b) => (cand.0, cand.1, cand.2) < (b.0, b.1, b.2),
        };
        if better {
            best = Some(cand);
        }
    }
    match best {
        Some((_, _, _, 0)) => Action::MoveAhead,
        Some((_, _, _, k)) if k <= 6 => Action::RotateRight,
        Some(_) => Action::RotateLeft,
        // boxed in (should not happen from a clear position): turn in place
        None => Action::RotateLeft,
    }
}
