//! Occupancy grid, signed distance field and segment traversal.

mod esdf;
mod grid;
mod mapfile;
mod raycast;

pub use esdf::{compute_esdf, EsdfGrid, DEFAULT_ESDF_CAP};
pub use grid::{Index3, VoxelGrid};
pub use mapfile::{parse_map, write_map};
pub use raycast::{for_each_segment_voxel, traverse_segment, SegmentVoxel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point ({}, {}, {}) is outside the map", point[0], point[1], point[2])]
    OutOfBounds { point: [f64; 3] },
    #[error("map line {line}: {message}")]
    MapParse { line: usize, message: String },
}
