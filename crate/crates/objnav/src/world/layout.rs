//! Procedural floor-plan generation: one vertical cut, one horizontal cut on
//! one half, doors carved on every shared wall.

use super::{RoomKind, WorldError, CELL_SIZE};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// One grid cell. Wall cells belong to exactly one room for coloring;
/// internal partitions are two back-to-back wall cells, one per room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free(u8),
    Wall(u8),
    Door,
}

/// Inclusive cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn contains(&self, c: (usize, usize)) -> bool {
        c.0 >= self.x0 && c.0 <= self.x1 && c.1 >= self.y0 && c.1 <= self.y1
    }

    /// Interior (free-cell) sub-rectangle.
    pub fn interior(&self) -> Rect {
        Rect {
            x0: self.x0 + 1,
            y0: self.y0 + 1,
            x1: self.x1 - 1,
            y1: self.y1 - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub id: u8,
    pub kind: RoomKind,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseLayout {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
    pub rooms: Vec<Room>,
    pub doors: Vec<(usize, usize)>,
}

impl HouseLayout {
    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    pub fn cell_checked(&self, x: i64, y: i64) -> Option<Cell> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.cell(x as usize, y as usize))
        }
    }

    pub fn is_walkable(&self, x: usize, y: usize) -> bool {
        matches!(self.cell(x, y), Cell::Free(_) | Cell::Door)
    }

    pub fn room(&self, kind: RoomKind) -> &Room {
        self.rooms.iter().find(|r| r.kind == kind).unwrap()
    }

    /// Free cells (not doors) of a given room, in row-major order.
    pub fn free_cells_of_room(&self, room_id: u8) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.cell(x, y) == Cell::Free(room_id) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn dims_meters(&self) -> (f64, f64) {
        (self.width as f64 * CELL_SIZE, self.height as f64 * CELL_SIZE)
    }
}

const MIN_GRID: usize = 20;
// A room rectangle needs a 4x4 free interior, i.e. 6x6 cells with walls.
const MIN_RECT: usize = 6;

/// Generate a 3-room layout. Deterministic for a given seed: the rectangle is
/// split by one vertical cut, one half is split by a horizontal cut (both
/// jittered within the middle third), doors are carved on every shared wall,
/// and room kinds are assigned by a seeded permutation.
pub fn generate_layout(seed: u64, grid_dims: (usize, usize)) -> Result<HouseLayout, WorldError> {
    let (w, h) = grid_dims;
    if w < MIN_GRID || h < MIN_GRID {
        return Err(WorldError::GridTooSmall(w, h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut kinds = RoomKind::ALL;
    kinds.shuffle(&mut rng);
    let split_left = rng.gen::<bool>();
    // Vertical cut: wall columns cx (left room) and cx+1 (right room).
    let cx = rng.gen_range(w / 3..2 * w / 3);
    let cy = rng.gen_range(h / 3..2 * h / 3);

    let left = Rect { x0: 0, y0: 0, x1: cx, y1: h - 1 };
    let right = Rect { x0: cx + 1, y0: 0, x1: w - 1, y1: h - 1 };
    let (rects, pairs): ([Rect; 3], [(usize, usize); 3]);
    if split_left {
        let lt = Rect { x1: left.x1, y1: cy, ..left };
        let lb = Rect { y0: cy + 1, ..left };
        rects = [lt, lb, right];
        // (room a, room b) adjacent pairs by index into rects
        pairs = [(0, 1), (0, 2), (1, 2)];
    } else {
        let rt = Rect { y1: cy, ..right };
        let rb = Rect { y0: cy + 1, ..right };
        rects = [left, rt, rb];
        pairs = [(1, 2), (0, 1), (0, 2)];
    }
    debug_assert!(rects
        .iter()
        .all(|r| r.x1 - r.x0 + 1 >= MIN_RECT && r.y1 - r.y0 + 1 >= MIN_RECT));

    let mut cells = vec![Cell::Door; w * h];
    for (id, r) in rects.iter().enumerate() {
        for y in r.y0..=r.y1 {
            for x in r.x0..=r.x1 {
                let on_border = x == r.x0 || x == r.x1 || y == r.y0 || y == r.y1;
                cells[y * w + x] = if on_border {
                    Cell::Wall(id as u8)
                } else {
                    Cell::Free(id as u8)
                };
            }
        }
    }

    // Doors: 3 cells wide along the wall, through both wall layers. The
    // 0.75 m opening leaves a 0.35 m channel under the 0.2 m clearance rule,
    // wide enough to thread with noisy 30-degree turns and 0.25 m steps.
    let mut doors = Vec::new();
    let mut carve = |cells: &mut Vec<Cell>, cs: [(usize, usize); 6]| {
        for (x, y) in cs {
            cells[y * w + x] = Cell::Door;
            doors.push((x, y));
        }
    };
    for &(a, b) in &pairs {
        let (ra, rb) = (rects[a], rects[b]);
        if ra.x1 + 1 == rb.x0 {
            // vertical shared wall at columns ra.x1 | rb.x0
            let lo = ra.y0.max(rb.y0) + 1;
            let hi = ra.y1.min(rb.y1) - 2;
            let p = rng.gen_range(lo..hi); // door rows p, p+1, p+2
            carve(
                &mut cells,
                [
                    (ra.x1, p),
                    (ra.x1, p + 1),
                    (ra.x1, p + 2),
                    (rb.x0, p),
                    (rb.x0, p + 1),
                    (rb.x0, p + 2),
                ],
            );
        } else if ra.y1 + 1 == rb.y0 {
            // horizontal shared wall at rows ra.y1 | rb.y0
            let lo = ra.x0.max(rb.x0) + 1;
            let hi = ra.x1.min(rb.x1) - 2;
            let p = rng.gen_range(lo..hi);
            carve(
                &mut cells,
                [
                    (p, ra.y1),
                    (p + 1, ra.y1),
                    (p + 2, ra.y1),
                    (p, rb.y0),
                    (p + 1, rb.y0),
                    (p + 2, rb.y0),
                ],
            );
        } else {
            unreachable!("rooms in a pair always share a wall");
        }
    }

    let rooms = (0..3)
        .map(|i| Room { id: i as u8, kind: kinds[i], rect: rects[i] })
        .collect();

    let layout = HouseLayout { width: w, height: h, cells, rooms, doors };
    debug_assert!(layout_connected(&layout));
    Ok(layout)
}

/// True iff the free-space graph (Free and Door cells, 4-connectivity) is a
/// single connected component.
pub fn layout_connected(layout: &HouseLayout) -> bool {
    let walkable: Vec<(usize, usize)> = (0..layout.height)
        .flat_map(|y| (0..layout.width).map(move |x| (x, y)))
        .filter(|&(x, y)| layout.is_walkable(x, y))
        .collect();
    let Some(&start) = walkable.first() else { return false };
    let mut seen = vec![false; layout.width * layout.height];
    let mut q = VecDeque::from([start]);
    seen[start.1 * layout.width + start.0] = true;
    let mut count = 1usize;
    while let Some((x, y)) = q.pop_front() {
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if let Some(c) = layout.cell_checked(nx, ny) {
                let (nx, ny) = (nx as usize, ny as usize);
                if matches!(c, Cell::Free(_) | Cell::Door) && !seen[ny * layout.width + nx] {
                    seen[ny * layout.width + nx] = true;
                    count += 1;
                    q.push_back((nx, ny));
                }
            }
        }
    }
    count == walkable.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connected_three_rooms() {
        let layout = generate_layout(7, (24, 24)).unwrap();
        assert_eq!(layout.rooms.len(), 3);
        assert!(layout_connected(&layout));
        // every room kind appears exactly once
        for kind in RoomKind::ALL {
            assert_eq!(layout.rooms.iter().filter(|r| r.kind == kind).count(), 1);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_layout(7, (24, 24)).unwrap();
        let b = generate_layout(7, (24, 24)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_layout(7, (24, 24)).unwrap();
        let b = generate_layout(8, (24, 24)).unwrap();
        let sa = serde_json::to_string(&a).unwrap();
        let sb = serde_json::to_string(&b).unwrap();
        assert_ne!(sa, sb);
    }

    #[test]
    fn rejects_small_grid() {
        assert!(matches!(
            generate_layout(1, (12, 12)),
            Err(WorldError::GridTooSmall(12, 12))
        ));
    }

    #[test]
    fn wall_cells_have_unique_room() {
        // all wall cells carry a room id in 0..3 and doors separate rooms
        let layout = generate_layout(3, (24, 24)).unwrap();
        for y in 0..layout.height {
            for x in 0..layout.width {
                match layout.cell(x, y) {
                    Cell::Wall(id) | Cell::Free(id) => assert!(id < 3),
                    Cell::Door => assert!(layout.doors.contains(&(x, y))),
                }
            }
        }
    }

    #[test]
    fn rooms_have_enough_free_cells() {
        for seed in 0..50 {
            let layout = generate_layout(seed, (20, 20)).unwrap();
            for room in &layout.rooms {
                assert!(
                    layout.free_cells_of_room(room.id).len() >= 16,
                    "seed {seed} room {:?}",
                    room.id
                );
            }
            assert!(layout_connected(&layout), "seed {seed}");
        }
    }
}
