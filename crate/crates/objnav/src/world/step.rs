//! Episode state, agent dynamics with actuation noise, visibility and
//! success checking.

use super::raycast::{pitch_gate, segment_blocked};
use super::{
    cell_center, angle_diff, Action, AgentPose, Cell, GeodesicField, House, HouseLayout,
    ObjectCategory, ObjectInstance, WorldError, CELL_SIZE, CLEARANCE, FOV_DEG, MAX_STEPS,
    STEP_MEAN, STEP_SIGMA, SUCCESS_RADIUS, TURN_MEAN, TURN_SIGMA,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// True iff `p` lies inside a walkable cell with at least the clearance
/// radius to every wall cell.
pub fn position_clear(layout: &HouseLayout, p: (f64, f64)) -> bool {
    let (cx, cy) = ((p.0 / CELL_SIZE).floor() as i64, (p.1 / CELL_SIZE).floor() as i64);
    match layout.cell_checked(cx, cy) {
        Some(Cell::Free(_)) | Some(Cell::Door) => {}
        _ => return false,
    }
    // every wall cell within the clearance radius must be at rectangle
    // distance >= CLEARANCE; only cells overlapping the radius box matter
    let lo_x = ((p.0 - CLEARANCE) / CELL_SIZE).floor() as i64;
    let hi_x = ((p.0 + CLEARANCE) / CELL_SIZE).floor() as i64;
    let lo_y = ((p.1 - CLEARANCE) / CELL_SIZE).floor() as i64;
    let hi_y = ((p.1 + CLEARANCE) / CELL_SIZE).floor() as i64;
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            let is_wall = match layout.cell_checked(x, y) {
                Some(Cell::Wall(_)) | None => true,
                _ => false,
            };
            if is_wall && rect_distance(p, (x, y)) < CLEARANCE {
                return false;
            }
        }
    }
    true
}

/// Distance from a point to the closed square of cell `(x, y)`.
fn rect_distance(p: (f64, f64), cell: (i64, i64)) -> f64 {
    let x0 = cell.0 as f64 * CELL_SIZE;
    let y0 = cell.1 as f64 * CELL_SIZE;
    let dx = (x0 - p.0).max(p.0 - (x0 + CELL_SIZE)).max(0.0);
    let dy = (y0 - p.1).max(p.1 - (y0 + CELL_SIZE)).max(0.0);
    (dx * dx + dy * dy).sqrt()
}

/// Visibility: the object is within the horizontal field of view, the
/// sight segment crosses no wall, and the pitch gate admits the object.
pub fn is_visible(pose: &AgentPose, obj: &ObjectInstance, house: &House) -> bool {
    let (ox, oy) = cell_center(obj.cell);
    let dist = ((ox - pose.x).powi(2) + (oy - pose.y).powi(2)).sqrt();
    if dist > 1e-9 {
        let bearing = (oy - pose.y).atan2(ox - pose.x).to_degrees();
        if angle_diff(bearing, pose.heading) > FOV_DEG / 2.0 {
            return false;
        }
        if segment_blocked(&house.layout, (pose.x, pose.y), (ox, oy)) {
            return false;
        }
    }
    pitch_gate(obj.category.size_class(), pose.pitch, dist)
}

/// One running episode. The house and its geodesic field are immutable and
/// shared; the state itself is single-owner mutable.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub house: Arc<House>,
    pub field: Arc<GeodesicField>,
    pub target: ObjectCategory,
    pub pose: AgentPose,
    pub t: u32,
    pub done_flag: bool,
    pub min_geodesic_so_far: f64,
    pub path_traveled: f64,
    /// Gaussian actuation noise on translation and rotation.
    pub actuation_noise: bool,
}

/// Serializable snapshot of an episode, without the shared house/field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSnapshot {
    pub target: ObjectCategory,
    pub pose: AgentPose,
    pub t: u32,
    pub done_flag: bool,
    pub min_geodesic_so_far: f64,
    pub path_traveled: f64,
    pub actuation_noise: bool,
}

impl EpisodeState {
    pub fn new(
        house: Arc<House>,
        field: Arc<GeodesicField>,
        target: ObjectCategory,
        pose: AgentPose,
    ) -> EpisodeState {
        let start_geo = field.at_pose(&pose);
        EpisodeState {
            house,
            field,
            target,
            pose,
            t: 0,
            done_flag: false,
            min_geodesic_so_far: start_geo,
            path_traveled: 0.0,
            actuation_noise: true,
        }
    }

    pub fn with_actuation_noise(mut self, on: bool) -> EpisodeState {
        self.actuation_noise = on;
        self
    }

    pub fn snapshot(&self) -> EpisodeSnapshot {
        EpisodeSnapshot {
            target: self.target,
            pose: self.pose,
            t: self.t,
            done_flag: self.done_flag,
            min_geodesic_so_far: self.min_geodesic_so_far,
            path_traveled: self.path_traveled,
            actuation_noise: self.actuation_noise,
        }
    }

    pub fn restore(
        house: Arc<House>,
        field: Arc<GeodesicField>,
        snap: EpisodeSnapshot,
    ) -> EpisodeState {
        EpisodeState {
            house,
            field,
            target: snap.target,
            pose: snap.pose,
            t: snap.t,
            done_flag: snap.done_flag,
            min_geodesic_so_far: snap.min_geodesic_so_far,
            path_traveled: snap.path_traveled,
            actuation_noise: snap.actuation_noise,
        }
    }

    /// Apply one action. Returns true when the episode terminated (Done
    /// action or step budget exhausted). MoveAhead is canceled entirely when
    /// the swept position would violate wall clearance.
    pub fn step<R: Rng>(&mut self, action: Action, rng: &mut R) -> bool {
        debug_assert!(!self.done_flag);
        match action {
            Action::MoveAhead => {
                let dist = if self.actuation_noise {
                    Normal::new(STEP_MEAN, STEP_SIGMA).unwrap().sample(rng)
                } else {
                    STEP_MEAN
                };
                let rad = self.pose.heading.to_radians();
                let (nx, ny) = (self.pose.x + dist * rad.cos(), self.pose.y + dist * rad.sin());
                let mid = ((self.pose.x + nx) / 2.0, (self.pose.y + ny) / 2.0);
                if position_clear(&self.house.layout, (nx, ny))
                    && position_clear(&self.house.layout, mid)
                {
                    self.path_traveled += dist;
                    self.pose.x = nx;
                    self.pose.y = ny;
                }
            }
            Action::RotateLeft | Action::RotateRight => {
                let turn = if self.actuation_noise {
                    Normal::new(TURN_MEAN, TURN_SIGMA).unwrap().sample(rng)
                } else {
                    TURN_MEAN
                };
                let sign = if action == Action::RotateLeft { -1.0 } else { 1.0 };
                self.pose.heading = (self.pose.heading + sign * turn).rem_euclid(360.0);
            }
            Action::LookUp => self.pose.pitch = (self.pose.pitch + 30).min(30),
            Action::LookDown => self.pose.pitch = (self.pose.pitch - 30).max(-30),
            Action::Done => self.done_flag = true,
        }
        self.t += 1;
        let current = self.field.at_pose(&self.pose);
        if current < self.min_geodesic_so_far {
            self.min_geodesic_so_far = current;
        }
        self.done_flag || self.t >= MAX_STEPS
    }

    pub fn geodesic_now(&self) -> f64 {
        self.field.at_pose(&self.pose)
    }
}

/// Success: the episode ended with a Done action, the agent is within the
/// success radius of the target, and the target is visible.
pub fn check_success(state: &EpisodeState) -> bool {
    if !state.done_flag {
        return false;
    }
    let obj = state.house.object(state.target);
    let (ox, oy) = cell_center(obj.cell);
    let dist = ((ox - state.pose.x).powi(2) + (oy - state.pose.y).powi(2)).sqrt();
    dist <= SUCCESS_RADIUS && is_visible(&state.pose, obj, &state.house)
}

/// Sample a start pose: uniform over walkable cells whose center satisfies
/// clearance, at a geodesic distance of at least `min_geo` from the success
/// region; heading uniform, pitch level.
pub fn sample_start_pose<R: Rng>(
    house: &House,
    field: &GeodesicField,
    min_geo: f64,
    rng: &mut R,
) -> Result<AgentPose, WorldError> {
    let layout = &house.layout;
    let mut candidates = Vec::new();
    for y in 0..layout.height {
        for x in 0..layout.width {
            if !matches!(layout.cell(x, y), Cell::Free(_)) {
                continue;
            }
            let d = field.at((x, y));
            if !d.is_finite() || d < min_geo {
                continue;
            }
            let c = cell_center((x, y));
            if position_clear(layout, c) {
                candidates.push(c);
            }
        }
    }
    if candidates.is_empty() {
        return Err(WorldError::NoStartCell(min_geo));
    }
    let (x, y) = candidates[rng.gen_range(0..candidates.len())];
    let heading = rng.gen_range(0.0..360.0);
    Ok(AgentPose { x, y, heading, pitch: 0 })
}

#[cfg(test)]
mod tests {
    use super::super::{generate_layout, geodesic_field, ColorAssignment, SizeClass};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_state() -> EpisodeState {
        let layout = generate_layout(11, (24, 24)).unwrap();
        let house = Arc::new(House::new(layout, ColorAssignment::TRAINING, 3).unwrap());
        let target = ObjectCategory::Bed;
        let field = Arc::new(geodesic_field(&house, target).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pose = sample_start_pose(&house, &field, 2.0, &mut rng).unwrap();
        EpisodeState::new(house, field, target, pose)
    }

    #[test]
    fn move_ahead_displacement_in_noise_bounds() {
        let mut state = test_state();
        // face open space: pick a heading along which the midpoint and
        // endpoint stay clear
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for h in [0.0, 90.0, 180.0, 270.0] {
            let mut s = state.clone();
            s.pose.heading = h;
            let before = (s.pose.x, s.pose.y);
            s.step(Action::MoveAhead, &mut rng);
            let d = ((s.pose.x - before.0).powi(2) + (s.pose.y - before.1).powi(2)).sqrt();
            if d > 0.0 {
                assert!(d >= STEP_MEAN - 4.0 * STEP_SIGMA && d <= STEP_MEAN + 4.0 * STEP_SIGMA);
                return;
            }
        }
        state.pose.heading = 0.0;
        panic!("no open direction found from start pose");
    }

    #[test]
    fn done_terminates_regardless_of_success() {
        let mut state = test_state();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let terminated = state.step(Action::Done, &mut rng);
        assert!(terminated);
        assert!(state.done_flag);
        assert!(!check_success(&state), "start is >= 2 m away");
    }

    #[test]
    fn blocked_move_is_canceled() {
        let mut state = test_state();
        // walk straight at the nearest wall until a move is canceled
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        state.pose.heading = 180.0;
        let mut canceled = false;
        for _ in 0..60 {
            let before = (state.pose.x, state.pose.y, state.t);
            state.step(Action::MoveAhead, &mut rng);
            if (state.pose.x, state.pose.y) == (before.0, before.1) {
                assert_eq!(state.t, before.2 + 1, "t still increments");
                canceled = true;
                break;
            }
        }
        assert!(canceled, "agent never reached a wall");
    }

    #[test]
    fn timeout_terminates_without_success() {
        let mut state = test_state();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut terminated = false;
        for _ in 0..MAX_STEPS {
            terminated = state.step(Action::RotateLeft, &mut rng);
            if terminated {
                break;
            }
        }
        assert!(terminated);
        assert_eq!(state.t, MAX_STEPS);
        assert!(!check_success(&state));
    }

    #[test]
    fn min_geodesic_monotone_over_episode() {
        let mut state = test_state();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut prev = state.min_geodesic_so_far;
        for i in 0..200 {
            let a = if i % 5 == 0 { Action::RotateLeft } else { Action::MoveAhead };
            if state.step(a, &mut rng) {
                break;
            }
            assert!(state.min_geodesic_so_far <= prev);
            prev = state.min_geodesic_so_far;
        }
        assert!(state.path_traveled >= 0.0);
    }

    #[test]
    fn small_object_needs_look_down() {
        let layout = generate_layout(11, (24, 24)).unwrap();
        let house = Arc::new(House::new(layout, ColorAssignment::TRAINING, 3).unwrap());
        let obj = *house.object(ObjectCategory::Apple);
        assert_eq!(obj.category.size_class(), SizeClass::Small);
        let (ox, oy) = cell_center(obj.cell);
        // one meter away along +x if that spot is walkable
        let pose = AgentPose { x: ox - 1.0, y: oy, heading: 0.0, pitch: 0 };
        if house
            .layout
            .cell_checked(((pose.x) / CELL_SIZE) as i64, ((pose.y) / CELL_SIZE) as i64)
            .map(|c| matches!(c, Cell::Free(_) | Cell::Door))
            .unwrap_or(false)
            && !segment_blocked(&house.layout, (pose.x, pose.y), (ox, oy))
        {
            assert!(!is_visible(&pose, &obj, &house), "level pitch hides small objects");
            let down = AgentPose { pitch: -30, ..pose };
            assert!(is_visible(&down, &obj, &house));
        }
    }

    #[test]
    fn occluded_object_not_visible() {
        let layout = generate_layout(11, (24, 24)).unwrap();
        let house = Arc::new(House::new(layout, ColorAssignment::TRAINING, 3).unwrap());
        // object in one room, agent in another: the partition wall occludes
        let obj = *house.object(ObjectCategory::Bed);
        let other_room = house
            .layout
            .rooms
            .iter()
            .find(|r| r.id != obj.room_id)
            .unwrap();
        let interior = other_room.rect.interior();
        let (x, y) = cell_center(((interior.x0 + interior.x1) / 2, (interior.y0 + interior.y1) / 2));
        let (ox, oy) = cell_center(obj.cell);
        let heading = (oy - y).atan2(ox - x).to_degrees().rem_euclid(360.0);
        let pose = AgentPose { x, y, heading, pitch: 0 };
        // facing it, in FOV, but at least 2 wall layers between room centers
        // unless a door happens to align; if blocked, not visible
        if segment_blocked(&house.layout, (x, y), (ox, oy)) {
            assert!(!is_visible(&pose, &obj, &house));
        }
    }
}
