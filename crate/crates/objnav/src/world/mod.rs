//! Procedural 3-room houses, agent dynamics, raycast observations, and
//! geodesic distance fields.

mod geodesic;
mod house;
mod layout;
mod raycast;
mod step;

pub use geodesic::{geodesic_field, success_region, GeodesicField};
pub use house::{place_objects, ColorAssignment, House, ObjectInstance, HOUSE_DOC_VERSION};
pub use layout::{generate_layout, layout_connected, Cell, HouseLayout, Rect, Room};
pub use raycast::{
    feature_width, pitch_gate, render_rays, segment_blocked, HitClass, RayObservation, RayRecord,
    FEATURES_PER_RAY, PITCH_FEATURES,
};
pub use step::{
    check_success, is_visible, position_clear, sample_start_pose, EpisodeSnapshot, EpisodeState,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of one grid cell, in meters. Matches the forward step size so
/// that cell-level geodesics align with path-length semantics.
pub const CELL_SIZE: f64 = 0.25;
/// Mean forward translation per MoveAhead, meters.
pub const STEP_MEAN: f64 = 0.25;
/// Actuation noise on forward translation, meters.
pub const STEP_SIGMA: f64 = 0.005;
/// Mean rotation per RotateLeft/RotateRight, degrees.
pub const TURN_MEAN: f64 = 30.0;
/// Actuation noise on rotation, degrees.
pub const TURN_SIGMA: f64 = 0.5;
/// Minimum distance the agent keeps from any wall cell, meters.
pub const CLEARANCE: f64 = 0.2;
/// Success radius around the target object, meters.
pub const SUCCESS_RADIUS: f64 = 1.0;
/// Small objects are only visible when looking down within this range.
pub const SMALL_VIS_RANGE: f64 = 2.0;
/// Horizontal camera field of view, degrees.
pub const FOV_DEG: f64 = 90.0;
/// Episode step budget.
pub const MAX_STEPS: u32 = 500;
/// Default number of rays per observation (odd, so a center ray exists).
pub const DEFAULT_K_RAYS: usize = 15;
/// Default maximum ray range, meters.
pub const DEFAULT_MAX_RANGE: f64 = 5.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("grid {0}x{1} too small: need at least 20x20 cells to host three rooms of 4x4 free cells")]
    GridTooSmall(usize, usize),
    #[error("object placement failed after {0} rejection-sampling attempts")]
    PlacementFailed(usize),
    #[error("empty success region for target {0:?}: invalid placement")]
    EmptySuccessRegion(ObjectCategory),
    #[error("no valid start cell at >= {0} m geodesic from the success region")]
    NoStartCell(f64),
}

/// The three room types every house contains exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoomKind {
    Kitchen,
    Bedroom,
    LivingRoom,
}

impl RoomKind {
    pub const ALL: [RoomKind; 3] = [RoomKind::Kitchen, RoomKind::Bedroom, RoomKind::LivingRoom];

    pub fn index(self) -> usize {
        match self {
            RoomKind::Kitchen => 0,
            RoomKind::Bedroom => 1,
            RoomKind::LivingRoom => 2,
        }
    }
}

/// The three wall colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WallColor {
    Red,
    Green,
    Blue,
}

impl WallColor {
    pub const ALL: [WallColor; 3] = [WallColor::Red, WallColor::Green, WallColor::Blue];

    pub fn index(self) -> usize {
        match self {
            WallColor::Red => 0,
            WallColor::Green => 1,
            WallColor::Blue => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WallColor::Red => "red wall",
            WallColor::Green => "green wall",
            WallColor::Blue => "blue wall",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Large,
}

/// The nine target object categories, three per room type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectCategory {
    Fridge,
    Kettle,
    Apple,
    Sofa,
    Television,
    Newspaper,
    Bed,
    Dresser,
    AlarmClock,
}

impl ObjectCategory {
    pub const ALL: [ObjectCategory; 9] = [
        ObjectCategory::Fridge,
        ObjectCategory::Kettle,
        ObjectCategory::Apple,
        ObjectCategory::Sofa,
        ObjectCategory::Television,
        ObjectCategory::Newspaper,
        ObjectCategory::Bed,
        ObjectCategory::Dresser,
        ObjectCategory::AlarmClock,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn home_room(self) -> RoomKind {
        match self {
            ObjectCategory::Fridge | ObjectCategory::Kettle | ObjectCategory::Apple => {
                RoomKind::Kitchen
            }
            ObjectCategory::Sofa | ObjectCategory::Television | ObjectCategory::Newspaper => {
                RoomKind::LivingRoom
            }
            ObjectCategory::Bed | ObjectCategory::Dresser | ObjectCategory::AlarmClock => {
                RoomKind::Bedroom
            }
        }
    }

    pub fn size_class(self) -> SizeClass {
        match self {
            ObjectCategory::Kettle
            | ObjectCategory::Apple
            | ObjectCategory::Newspaper
            | ObjectCategory::AlarmClock => SizeClass::Small,
            _ => SizeClass::Large,
        }
    }

    /// Label inserted into the text prompt template.
    pub fn label(self) -> &'static str {
        match self {
            ObjectCategory::Fridge => "fridge",
            ObjectCategory::Kettle => "kettle",
            ObjectCategory::Apple => "apple",
            ObjectCategory::Sofa => "sofa",
            ObjectCategory::Television => "television",
            ObjectCategory::Newspaper => "newspaper",
            ObjectCategory::Bed => "bed",
            ObjectCategory::Dresser => "dresser",
            ObjectCategory::AlarmClock => "alarm clock",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.label() == label)
    }
}

/// The six discrete actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveAhead,
    RotateLeft,
    RotateRight,
    LookUp,
    LookDown,
    Done,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::MoveAhead,
        Action::RotateLeft,
        Action::RotateRight,
        Action::LookUp,
        Action::LookDown,
        Action::Done,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|a| *a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }
}

/// Continuous agent pose. Position is in meters, heading in degrees in
/// [0, 360), pitch in {-30, 0, +30}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub pitch: i8,
}

impl AgentPose {
    pub fn cell(&self) -> (usize, usize) {
        (
            (self.x / CELL_SIZE).floor() as usize,
            (self.y / CELL_SIZE).floor() as usize,
        )
    }
}

/// Center of a grid cell in world coordinates.
pub fn cell_center(cell: (usize, usize)) -> (f64, f64) {
    (
        (cell.0 as f64 + 0.5) * CELL_SIZE,
        (cell.1 as f64 + 0.5) * CELL_SIZE,
    )
}

/// Smallest absolute angular difference between two headings, degrees.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d = 360.0 - d;
    }
    d
}

/// Signed angular difference `to - from` wrapped into (-180, 180].
pub fn signed_angle_diff(from: f64, to: f64) -> f64 {
    let mut d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}
