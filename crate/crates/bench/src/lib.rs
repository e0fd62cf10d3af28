//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use modalvox::hexfem::{AssembledSystem, Material};
use modalvox::shapes::{gen_shape, ShapeKind, DEFAULT_VOXEL_SIZE};
use modalvox::VoxelGrid;

pub fn grid(kind: ShapeKind, res: u32) -> VoxelGrid {
    gen_shape(kind, res, DEFAULT_VOXEL_SIZE).expect("procedural shape")
}

pub fn system(kind: ShapeKind, res: u32) -> AssembledSystem {
    let mat = Material::by_name("ceramic").expect("built-in material");
    AssembledSystem::build(Arc::new(grid(kind, res)), &mat).expect("assembly")
}
