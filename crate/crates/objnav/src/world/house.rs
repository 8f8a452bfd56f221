//! Houses: a layout plus wall colors and object placements, with a versioned
//! JSON serialization (run-length-encoded grid).

use super::raycast::segment_blocked;
use super::{
    cell_center, Cell, HouseLayout, ObjectCategory, RoomKind, WallColor, WorldError,
    SUCCESS_RADIUS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Total map from room kind to wall color. Repetition across rooms allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColorAssignment {
    pub kitchen: WallColor,
    pub bedroom: WallColor,
    pub living_room: WallColor,
}

impl ColorAssignment {
    /// The fixed training-time bias: kitchens red, bedrooms green, living
    /// rooms blue.
    pub const TRAINING: ColorAssignment = ColorAssignment {
        kitchen: WallColor::Red,
        bedroom: WallColor::Green,
        living_room: WallColor::Blue,
    };

    pub fn color_of(&self, kind: RoomKind) -> WallColor {
        match kind {
            RoomKind::Kitchen => self.kitchen,
            RoomKind::Bedroom => self.bedroom,
            RoomKind::LivingRoom => self.living_room,
        }
    }

    pub fn with_color(mut self, kind: RoomKind, color: WallColor) -> Self {
        match kind {
            RoomKind::Kitchen => self.kitchen = color,
            RoomKind::Bedroom => self.bedroom = color,
            RoomKind::LivingRoom => self.living_room = color,
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub category: ObjectCategory,
    pub room_id: u8,
    pub cell: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct House {
    pub layout: HouseLayout,
    pub colors: ColorAssignment,
    pub objects: Vec<ObjectInstance>,
}

impl House {
    pub fn new(
        layout: HouseLayout,
        colors: ColorAssignment,
        seed: u64,
    ) -> Result<House, WorldError> {
        let objects = place_objects(&layout, seed)?;
        Ok(House { layout, colors, objects })
    }

    pub fn object(&self, category: ObjectCategory) -> &ObjectInstance {
        self.objects.iter().find(|o| o.category == category).unwrap()
    }

    pub fn object_at(&self, cell: (usize, usize)) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.cell == cell)
    }

    /// Wall color seen on a wall cell: the color assigned to the room the
    /// wall belongs to.
    pub fn wall_color_at(&self, room_id: u8) -> WallColor {
        let kind = self.layout.rooms[room_id as usize].kind;
        self.colors.color_of(kind)
    }
}

const PLACEMENT_ATTEMPTS: usize = 100;

/// Place exactly one instance of each category in a uniformly sampled free
/// cell of its home room, without replacement. Placements must be
/// Done-reachable: some other walkable cell within the success radius has
/// line of sight to the object; pathological draws are rejected and
/// re-sampled.
pub fn place_objects(layout: &HouseLayout, seed: u64) -> Result<Vec<ObjectInstance>, WorldError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut placed = Vec::with_capacity(9);
        for room in &layout.rooms {
            let mut free = layout.free_cells_of_room(room.id);
            let cats: Vec<ObjectCategory> = ObjectCategory::ALL
                .iter()
                .copied()
                .filter(|c| c.home_room() == room.kind)
                .collect();
            for cat in cats {
                if free.is_empty() {
                    return Err(WorldError::PlacementFailed(PLACEMENT_ATTEMPTS));
                }
                let i = rng.gen_range(0..free.len());
                let cell = free.swap_remove(i);
                placed.push(ObjectInstance { category: cat, room_id: room.id, cell });
            }
        }
        if placed.iter().all(|o| done_reachable(layout, o.cell)) {
            placed.sort_by_key(|o| o.category.index());
            return Ok(placed);
        }
    }
    Err(WorldError::PlacementFailed(PLACEMENT_ATTEMPTS))
}

/// Some walkable cell other than the object's own has its center within the
/// success radius and an unobstructed segment to the object center.
fn done_reachable(layout: &HouseLayout, obj_cell: (usize, usize)) -> bool {
    let target = cell_center(obj_cell);
    let r = (SUCCESS_RADIUS / super::CELL_SIZE).ceil() as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx == 0 && dy == 0 {
                continue;
            }
            let (x, y) = (obj_cell.0 as i64 + dx, obj_cell.1 as i64 + dy);
            let Some(c) = layout.cell_checked(x, y) else { continue };
            if !matches!(c, Cell::Free(_) | Cell::Door) {
                continue;
            }
            let p = cell_center((x as usize, y as usize));
            let dist = ((p.0 - target.0).powi(2) + (p.1 - target.1).powi(2)).sqrt();
            if dist <= SUCCESS_RADIUS && !segment_blocked(layout, p, target) {
                return true;
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Versioned JSON serialization with a run-length-encoded grid.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct HouseDoc {
    version: u32,
    width: usize,
    height: usize,
    /// Run-length encoding of the row-major cell map.
    grid_rle: Vec<(u32, Cell)>,
    rooms: Vec<super::Room>,
    doors: Vec<(usize, usize)>,
    colors: ColorAssignment,
    objects: Vec<ObjectInstance>,
}

pub const HOUSE_DOC_VERSION: u32 = 1;

impl House {
    pub fn to_json(&self) -> String {
        let mut rle: Vec<(u32, Cell)> = Vec::new();
        for &c in &self.layout.cells {
            match rle.last_mut() {
                Some((n, last)) if *last == c => *n += 1,
                _ => rle.push((1, c)),
            }
        }
        let doc = HouseDoc {
            version: HOUSE_DOC_VERSION,
            width: self.layout.width,
            height: self.layout.height,
            grid_rle: rle,
            rooms: self.layout.rooms.clone(),
            doors: self.layout.doors.clone(),
            colors: self.colors,
            objects: self.objects.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("house serialization")
    }

    pub fn from_json(s: &str) -> Result<House, serde_json::Error> {
        let doc: HouseDoc = serde_json::from_str(s)?;
        let mut cells = Vec::with_capacity(doc.width * doc.height);
        for (n, c) in doc.grid_rle {
            cells.extend(std::iter::repeat(c).take(n as usize));
        }
        Ok(House {
            layout: HouseLayout {
                width: doc.width,
                height: doc.height,
                cells,
                rooms: doc.rooms,
                doors: doc.doors,
            },
            colors: doc.colors,
            objects: doc.objects,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::generate_layout;
    use super::*;

    #[test]
    fn one_fridge_in_kitchen() {
        let layout = generate_layout(11, (24, 24)).unwrap();
        let objects = place_objects(&layout, 0).unwrap();
        let fridges: Vec<_> = objects
            .iter()
            .filter(|o| o.category == ObjectCategory::Fridge)
            .collect();
        assert_eq!(fridges.len(), 1);
        let kitchen = layout.room(RoomKind::Kitchen);
        assert_eq!(fridges[0].room_id, kitchen.id);
        assert!(kitchen.rect.interior().contains(fridges[0].cell));
    }

    #[test]
    fn deterministic_placement() {
        let layout = generate_layout(11, (24, 24)).unwrap();
        assert_eq!(place_objects(&layout, 5).unwrap(), place_objects(&layout, 5).unwrap());
    }

    #[test]
    fn placements_reachable_over_many_seeds() {
        let layout = generate_layout(11, (24, 24)).unwrap();
        for seed in 0..1000 {
            let objects = place_objects(&layout, seed).unwrap();
            assert_eq!(objects.len(), 9);
            // no two objects share a cell
            for i in 0..9 {
                for j in i + 1..9 {
                    assert_ne!(objects[i].cell, objects[j].cell, "seed {seed}");
                }
            }
            for o in &objects {
                assert!(done_reachable(&layout, o.cell), "seed {seed} {:?}", o.category);
            }
        }
    }

    #[test]
    fn house_json_round_trip() {
        let layout = generate_layout(11, (24, 24)).unwrap();
        let house = House::new(layout, ColorAssignment::TRAINING, 3).unwrap();
        let json = house.to_json();
        let back = House::from_json(&json).unwrap();
        assert_eq!(house, back);
    }
}
