//! Scene construction: a layout seed expands into a house (training colors,
//! fixed object placement) plus per-target geodesic fields. Fields depend
//! only on geometry, so recoloring a scene shares them.

use crate::world::{
    geodesic_field, generate_layout, ColorAssignment, GeodesicField, House, ObjectCategory,
    WorldError,
};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Scene {
    pub layout_seed: u64,
    pub house: Arc<House>,
    /// Geodesic fields indexed by `ObjectCategory::index`.
    pub fields: Vec<Arc<GeodesicField>>,
}

impl Scene {
    pub fn build(
        layout_seed: u64,
        grid: (usize, usize),
        colors: ColorAssignment,
    ) -> Result<Scene, WorldError> {
        let layout = generate_layout(layout_seed, grid)?;
        let house = Arc::new(House::new(layout, colors, layout_seed)?);
        let fields = ObjectCategory::ALL
            .iter()
            .map(|c| geodesic_field(&house, *c).map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Scene { layout_seed, house, fields })
    }

    pub fn field(&self, target: ObjectCategory) -> Arc<GeodesicField> {
        self.fields[target.index()].clone()
    }

    /// The same geometry and objects under a different color assignment.
    pub fn with_colors(&self, colors: ColorAssignment) -> Scene {
        let mut house = (*self.house).clone();
        house.colors = colors;
        Scene { layout_seed: self.layout_seed, house: Arc::new(house), fields: self.fields.clone() }
    }
}

pub fn build_scenes(
    seeds: &[u64],
    grid: (usize, usize),
    colors: ColorAssignment,
) -> Result<Vec<Scene>, WorldError> {
    seeds.iter().map(|&s| Scene::build(s, grid, colors)).collect()
}
