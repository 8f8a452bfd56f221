//! Grid raycasting (Amanatides-Woo traversal) and the symbolic egocentric
//! observation it produces.

use super::{
    AgentPose, Cell, House, HouseLayout, ObjectCategory, SizeClass, WallColor, CELL_SIZE, FOV_DEG,
    SMALL_VIS_RANGE,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HitClass {
    Wall(WallColor),
    Door,
    Object(ObjectCategory),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayRecord {
    /// Distance along the ray to the hit cell boundary, clipped to max range.
    pub distance: f64,
    pub hit: HitClass,
}

/// Egocentric percept: K rays evenly spanning the 90 degree field of view,
/// plus the current pitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayObservation {
    pub rays: Vec<RayRecord>,
    pub pitch: i8,
}

/// Features per ray: distance, 3 hit-class one-hots, 3 wall-color one-hots,
/// 9 object-category one-hots.
pub const FEATURES_PER_RAY: usize = 16;
/// Pitch one-hot width appended after the ray features.
pub const PITCH_FEATURES: usize = 3;

pub fn feature_width(k_rays: usize) -> usize {
    k_rays * FEATURES_PER_RAY + PITCH_FEATURES
}

impl RayObservation {
    /// Flattened feature vector. When `zero_wall_color` is set the wall-color
    /// one-hots are zeroed (the synthetic encoder routes color through its
    /// style basis instead).
    pub fn features(&self, zero_wall_color: bool) -> Vec<f64> {
        let mut f = Vec::with_capacity(feature_width(self.rays.len()));
        for r in &self.rays {
            let base = f.len();
            f.extend_from_slice(&[0.0; FEATURES_PER_RAY]);
            f[base] = r.distance;
            match r.hit {
                HitClass::Wall(color) => {
                    f[base + 1] = 1.0;
                    if !zero_wall_color {
                        f[base + 4 + color.index()] = 1.0;
                    }
                }
                HitClass::Door => f[base + 2] = 1.0,
                HitClass::Object(cat) => {
                    f[base + 3] = 1.0;
                    f[base + 7 + cat.index()] = 1.0;
                }
            }
        }
        let pitch_idx = match self.pitch {
            -30 => 0,
            0 => 1,
            _ => 2,
        };
        let base = f.len();
        f.extend_from_slice(&[0.0; PITCH_FEATURES]);
        f[base + pitch_idx] = 1.0;
        f
    }

    /// Per-color wall visibility mass: fraction of rays hitting each color,
    /// weighted by 1/(1+distance).
    pub fn color_mass(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for r in &self.rays {
            if let HitClass::Wall(color) = r.hit {
                c[color.index()] += 1.0 / (1.0 + r.distance);
            }
        }
        let k = self.rays.len() as f64;
        c.iter_mut().for_each(|v| *v /= k);
        c
    }

    pub fn total_wall_mass(&self) -> f64 {
        self.color_mass().iter().sum()
    }
}

/// Walk cells crossed by a ray from `origin` along `(dx, dy)` (unit vector),
/// yielding `(cell, entry_distance)` excluding the origin cell. Exact ties at
/// cell corners step both axes, so corner contact does not visit side cells.
struct GridWalk {
    cx: i64,
    cy: i64,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
}

impl GridWalk {
    fn new(origin: (f64, f64), dir: (f64, f64)) -> GridWalk {
        let cx = (origin.0 / CELL_SIZE).floor() as i64;
        let cy = (origin.1 / CELL_SIZE).floor() as i64;
        let mk = |pos: f64, d: f64, c: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                let boundary = (c + 1) as f64 * CELL_SIZE;
                (1, (boundary - pos) / d, CELL_SIZE / d)
            } else if d < 0.0 {
                let boundary = c as f64 * CELL_SIZE;
                (-1, (boundary - pos) / d, CELL_SIZE / -d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, t_max_x, t_delta_x) = mk(origin.0, dir.0, cx);
        let (step_y, t_max_y, t_delta_y) = mk(origin.1, dir.1, cy);
        GridWalk { cx, cy, step_x, step_y, t_max_x, t_max_y, t_delta_x, t_delta_y }
    }
}

impl Iterator for GridWalk {
    type Item = ((i64, i64), f64);

    fn next(&mut self) -> Option<Self::Item> {
        let t;
        if (self.t_max_x - self.t_max_y).abs() < 1e-12 {
            // corner crossing: advance diagonally
            t = self.t_max_x;
            self.cx += self.step_x;
            self.cy += self.step_y;
            self.t_max_x += self.t_delta_x;
            self.t_max_y += self.t_delta_y;
        } else if self.t_max_x < self.t_max_y {
            t = self.t_max_x;
            self.cx += self.step_x;
            self.t_max_x += self.t_delta_x;
        } else {
            t = self.t_max_y;
            self.cy += self.step_y;
            self.t_max_y += self.t_delta_y;
        }
        if t.is_finite() {
            Some(((self.cx, self.cy), t))
        } else {
            None
        }
    }
}

/// True iff the open segment from `a` to `b` crosses a Wall cell. Door cells
/// do not occlude.
pub fn segment_blocked(layout: &HouseLayout, a: (f64, f64), b: (f64, f64)) -> bool {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    if len < 1e-12 {
        return false;
    }
    let dir = ((b.0 - a.0) / len, (b.1 - a.1) / len);
    for ((cx, cy), t) in GridWalk::new(a, dir) {
        if t >= len {
            break;
        }
        match layout.cell_checked(cx, cy) {
            Some(Cell::Wall(_)) | None => return true,
            _ => {}
        }
    }
    false
}

/// Whether an object of the given size class passes the pitch gate at the
/// given pitch and distance.
pub fn pitch_gate(size: SizeClass, pitch: i8, distance: f64) -> bool {
    match size {
        SizeClass::Large => pitch <= 0,
        SizeClass::Small => pitch == -30 && distance <= SMALL_VIS_RANGE,
    }
}

/// Cast K rays evenly spanning the field of view. Each ray stops at the first
/// Wall, Door, or pitch-visible object cell; objects invisible under the
/// pitch gate are skipped. Distances are clipped to `max_range`.
pub fn render_rays(pose: &AgentPose, house: &House, k: usize, max_range: f64) -> RayObservation {
    assert!(k >= 3 && k % 2 == 1, "K must be odd and >= 3");
    let mut rays = Vec::with_capacity(k);
    for j in 0..k {
        let bearing = pose.heading - FOV_DEG / 2.0 + j as f64 * FOV_DEG / (k - 1) as f64;
        let rad = bearing.to_radians();
        let dir = (rad.cos(), rad.sin());
        let mut hit = None;
        for ((cx, cy), t) in GridWalk::new((pose.x, pose.y), dir) {
            match house.layout.cell_checked(cx, cy) {
                None => break, // outside the grid; bounded houses never get here
                Some(Cell::Wall(room_id)) => {
                    hit = Some((t, HitClass::Wall(house.wall_color_at(room_id))));
                    break;
                }
                Some(Cell::Door) => {
                    hit = Some((t, HitClass::Door));
                    break;
                }
                Some(Cell::Free(_)) => {
                    if let Some(obj) = house.object_at((cx as usize, cy as usize)) {
                        if pitch_gate(obj.category.size_class(), pose.pitch, t) {
                            hit = Some((t, HitClass::Object(obj.category)));
                            break;
                        }
                    }
                }
            }
        }
        let (t, class) = hit.expect("enclosed house: every ray hits a wall");
        rays.push(RayRecord { distance: t.min(max_range), hit: class });
    }
    RayObservation { rays, pitch: pose.pitch }
}

#[cfg(test)]
mod tests {
    use super::super::{generate_layout, ColorAssignment, House, RoomKind};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_house() -> House {
        let layout = generate_layout(11, (24, 24)).unwrap();
        House::new(layout, ColorAssignment::TRAINING, 3).unwrap()
    }

    /// Fine-step ray march: first sampled point whose cell is a hit.
    fn ray_march_oracle(pose: &AgentPose, house: &House, bearing: f64) -> Option<(f64, HitClass)> {
        let rad = bearing.to_radians();
        let (dx, dy) = (rad.cos(), rad.sin());
        let mut t = 0.0;
        let start = ((pose.x / CELL_SIZE).floor(), (pose.y / CELL_SIZE).floor());
        loop {
            t += 0.002;
            if t > 20.0 {
                return None;
            }
            let (px, py) = (pose.x + t * dx, pose.y + t * dy);
            let (cx, cy) = ((px / CELL_SIZE).floor(), (py / CELL_SIZE).floor());
            if (cx, cy) == start {
                continue;
            }
            match house.layout.cell_checked(cx as i64, cy as i64) {
                None => return None,
                Some(Cell::Wall(id)) => {
                    return Some((t, HitClass::Wall(house.wall_color_at(id))))
                }
                Some(Cell::Door) => return Some((t, HitClass::Door)),
                Some(Cell::Free(_)) => {
                    if let Some(o) = house.object_at((cx as usize, cy as usize)) {
                        if pitch_gate(o.category.size_class(), pose.pitch, t) {
                            return Some((t, HitClass::Object(o.category)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ray_distances_match_ray_march_oracle() {
        let house = test_house();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 200 {
            let x = rng.gen_range(0.5..5.5);
            let y = rng.gen_range(0.5..5.5);
            let cell = ((x / CELL_SIZE) as usize, (y / CELL_SIZE) as usize);
            if !house.layout.is_walkable(cell.0, cell.1) {
                continue;
            }
            let pose = AgentPose {
                x,
                y,
                heading: rng.gen_range(0.0..360.0),
                pitch: *[-30, 0, 30].iter().nth(rng.gen_range(0..3)).unwrap(),
            };
            let obs = render_rays(&pose, &house, 15, 100.0);
            for (j, ray) in obs.rays.iter().enumerate() {
                let bearing = pose.heading - 45.0 + j as f64 * 90.0 / 14.0;
                // point sampling cannot resolve a ray that clips the sliver
                // of a cell right at a lattice corner; skip those rays
                let rad = bearing.to_radians();
                let hx = pose.x + ray.distance * rad.cos();
                let hy = pose.y + ray.distance * rad.sin();
                let corner_gap = |v: f64| (v / CELL_SIZE - (v / CELL_SIZE).round()).abs();
                if corner_gap(hx) < 0.02 && corner_gap(hy) < 0.02 {
                    continue;
                }
                let (t, class) = ray_march_oracle(&pose, &house, bearing)
                    .expect("oracle should hit inside enclosed house");
                assert!(
                    (t - ray.distance).abs() <= CELL_SIZE,
                    "ray {j} at {pose:?}: dda {} vs march {t}",
                    ray.distance
                );
                assert_eq!(ray.hit, class, "ray {j} at {pose:?}");
            }
            checked += 1;
        }
    }

    #[test]
    fn facing_red_wall_all_rays_red() {
        let house = test_house();
        let kitchen = house.layout.room(RoomKind::Kitchen);
        // stand just inside the kitchen's left wall looking straight at it
        let interior = kitchen.rect.interior();
        let cell = (interior.x0, (interior.y0 + interior.y1) / 2);
        let (x, y) = super::super::cell_center(cell);
        let pose = AgentPose { x, y, heading: 180.0, pitch: 0 };
        let obs = render_rays(&pose, &house, 15, 100.0);
        for r in &obs.rays {
            // close to the wall the whole FOV lands on it (or its corners)
            if let HitClass::Wall(c) = r.hit {
                assert_eq!(c, WallColor::Red);
            }
        }
        assert!(obs.rays.iter().any(|r| matches!(r.hit, HitClass::Wall(_))));
    }

    #[test]
    fn center_ray_hits_large_object() {
        let house = test_house();
        let obj = house.object(ObjectCategory::Fridge);
        let (ox, oy) = super::super::cell_center(obj.cell);
        // stand two cells away in the same row if walkable, facing the object
        let from = (obj.cell.0 as i64 - 2, obj.cell.1 as i64);
        if let Some(Cell::Free(_)) = house.layout.cell_checked(from.0, from.1) {
            let (x, y) = super::super::cell_center((from.0 as usize, from.1 as usize));
            let heading = (oy - y).atan2(ox - x).to_degrees().rem_euclid(360.0);
            let pose = AgentPose { x, y, heading, pitch: 0 };
            let obs = render_rays(&pose, &house, 15, 100.0);
            let center = &obs.rays[7];
            assert_eq!(center.hit, HitClass::Object(ObjectCategory::Fridge));
        }
    }

    #[test]
    fn distance_clipped_to_max_range() {
        let house = test_house();
        let pose = AgentPose { x: 3.0, y: 3.0, heading: 0.0, pitch: 0 };
        let obs = render_rays(&pose, &house, 15, 1.0);
        for r in &obs.rays {
            assert!(r.distance > 0.0 && r.distance <= 1.0);
        }
    }

    #[test]
    fn feature_vector_shape_and_one_hot() {
        let house = test_house();
        let pose = AgentPose { x: 3.0, y: 3.0, heading: 0.0, pitch: 0 };
        let obs = render_rays(&pose, &house, 15, 5.0);
        let f = obs.features(false);
        assert_eq!(f.len(), feature_width(15));
        for (j, _) in obs.rays.iter().enumerate() {
            let class_sum: f64 = f[j * 16 + 1..j * 16 + 4].iter().sum();
            assert_eq!(class_sum, 1.0, "exactly one hit class per ray");
        }
        let zeroed = obs.features(true);
        for j in 0..15 {
            assert!(zeroed[j * 16 + 4..j * 16 + 7].iter().all(|v| *v == 0.0));
        }
    }
}
