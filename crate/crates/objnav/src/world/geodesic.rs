//! Geodesic distance fields: breadth-first distance from the target's
//! success region over the walkable 4-connected grid.

use super::raycast::segment_blocked;
use super::{cell_center, AgentPose, Cell, House, ObjectCategory, WorldError, CELL_SIZE, SUCCESS_RADIUS};
use std::collections::VecDeque;

/// Per-cell geodesic distance to the success region, meters. Non-walkable or
/// unreachable cells hold +infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub width: usize,
    pub height: usize,
    pub dist: Vec<f64>,
}

impl GeodesicField {
    pub fn at(&self, cell: (usize, usize)) -> f64 {
        self.dist[cell.1 * self.width + cell.0]
    }

    pub fn at_pose(&self, pose: &AgentPose) -> f64 {
        self.at(pose.cell())
    }
}

/// Cells belonging to the success region for a target: walkable cells whose
/// center lies within the success radius of the object center with an
/// unobstructed segment to it. Best-case heading and pitch always admit
/// visibility from such a cell.
pub fn success_region(house: &House, target: ObjectCategory) -> Vec<(usize, usize)> {
    let obj = house.object(target);
    let center = cell_center(obj.cell);
    let layout = &house.layout;
    let r = (SUCCESS_RADIUS / CELL_SIZE).ceil() as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (obj.cell.0 as i64 + dx, obj.cell.1 as i64 + dy);
            let Some(c) = layout.cell_checked(x, y) else { continue };
            if !matches!(c, Cell::Free(_) | Cell::Door) {
                continue;
            }
            let p = cell_center((x as usize, y as usize));
            let d = ((p.0 - center.0).powi(2) + (p.1 - center.1).powi(2)).sqrt();
            if d <= SUCCESS_RADIUS && !segment_blocked(layout, p, center) {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}

/// Breadth-first distance field (edge cost = one cell, 4-connectivity) from
/// the target's success region.
pub fn geodesic_field(house: &House, target: ObjectCategory) -> Result<GeodesicField, WorldError> {
    let sources = success_region(house, target);
    if sources.is_empty() {
        return Err(WorldError::EmptySuccessRegion(target));
    }
    let layout = &house.layout;
    let (w, h) = (layout.width, layout.height);
    let mut dist = vec![f64::INFINITY; w * h];
    let mut q = VecDeque::new();
    for s in sources {
        dist[s.1 * w + s.0] = 0.0;
        q.push_back(s);
    }
    while let Some((x, y)) = q.pop_front() {
        let d = dist[y * w + x];
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if let Some(c) = layout.cell_checked(nx, ny) {
                if matches!(c, Cell::Free(_) | Cell::Door) {
                    let (nx, ny) = (nx as usize, ny as usize);
                    if dist[ny * w + nx].is_infinite() {
                        dist[ny * w + nx] = d + CELL_SIZE;
                        q.push_back((nx, ny));
                    }
                }
            }
        }
    }
    Ok(GeodesicField { width: w, height: h, dist })
}

#[cfg(test)]
mod tests {
    use super::super::{generate_layout, layout_connected, ColorAssignment, House};
    use super::*;
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    /// Independent Dijkstra with uniform weights over the same graph.
    fn dijkstra_oracle(house: &House, target: ObjectCategory) -> Vec<f64> {
        let layout = &house.layout;
        let (w, h) = (layout.width, layout.height);
        let mut dist = vec![f64::INFINITY; w * h];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
        for s in success_region(house, target) {
            dist[s.1 * w + s.0] = 0.0;
            heap.push(Reverse((0, s.1 * w + s.0)));
        }
        while let Some(Reverse((steps, idx))) = heap.pop() {
            let d = steps as f64 * CELL_SIZE;
            if d > dist[idx] {
                continue;
            }
            let (x, y) = (idx % w, idx / w);
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if let Some(c) = layout.cell_checked(nx, ny) {
                    if matches!(c, Cell::Free(_) | Cell::Door) {
                        let nidx = ny as usize * w + nx as usize;
                        let nd = (steps + 1) as f64 * CELL_SIZE;
                        if nd < dist[nidx] {
                            dist[nidx] = nd;
                            heap.push(Reverse((steps + 1, nidx)));
                        }
                    }
                }
            }
        }
        dist
    }

    #[test]
    fn matches_dijkstra_oracle() {
        for seed in 0..10 {
            let layout = generate_layout(seed, (24, 24)).unwrap();
            let house = House::new(layout, ColorAssignment::TRAINING, seed).unwrap();
            for target in ObjectCategory::ALL {
                let field = geodesic_field(&house, target).unwrap();
                let oracle = dijkstra_oracle(&house, target);
                assert_eq!(field.dist, oracle, "seed {seed} target {target:?}");
            }
        }
    }

    #[test]
    fn success_region_zero_adjacent_quarter() {
        let layout = generate_layout(11, (24, 24)).unwrap();
        let house = House::new(layout, ColorAssignment::TRAINING, 3).unwrap();
        let target = ObjectCategory::Sofa;
        let field = geodesic_field(&house, target).unwrap();
        let obj = house.object(target);
        assert_eq!(field.at(obj.cell), 0.0);
        // a walkable 4-neighbor of a region cell not itself in the region is
        // one step away
        let region = success_region(&house, target);
        for &(x, y) in &region {
            assert_eq!(field.at((x, y)), 0.0);
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let n = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                if house.layout.is_walkable(n.0, n.1) && !region.contains(&n) {
                    assert_eq!(field.at(n), CELL_SIZE);
                }
            }
        }
    }

    #[test]
    fn field_finite_on_all_free_cells() {
        for seed in 0..20 {
            let layout = generate_layout(seed, (24, 24)).unwrap();
            assert!(layout_connected(&layout));
            let house = House::new(layout, ColorAssignment::TRAINING, seed).unwrap();
            let field = geodesic_field(&house, ObjectCategory::Bed).unwrap();
            for y in 0..house.layout.height {
                for x in 0..house.layout.width {
                    if house.layout.is_walkable(x, y) {
                        assert!(field.at((x, y)).is_finite(), "seed {seed} ({x},{y})");
                    }
                }
            }
        }
    }
}
