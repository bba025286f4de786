//! Exact voxel traversal of a line segment (Amanatides & Woo stepping).

use std::ops::ControlFlow;

use crate::Vec3;

use super::{Index3, VoxelGrid, WorldError};

/// One voxel crossed by a segment `a + t (b - a)`, with the parameter interval
/// `[t_enter, t_exit] ⊂ [0, 1]` spent inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentVoxel {
    pub index: Index3,
    pub t_enter: f64,
    pub t_exit: f64,
}

impl SegmentVoxel {
    pub fn t_mid(&self) -> f64 {
        0.5 * (self.t_enter + self.t_exit)
    }
}

fn out_of_bounds(p: &Vec3) -> WorldError {
    WorldError::OutOfBounds { point: [p.x, p.y, p.z] }
}

/// Visits every voxel whose cell the segment `a -> b` touches, in order from `a` to `b`.
/// Consecutive voxels are face neighbors. The visitor may stop early by returning
/// `ControlFlow::Break`.
pub fn for_each_segment_voxel<F>(grid: &VoxelGrid, a: &Vec3, b: &Vec3, mut visit: F) -> Result<(), WorldError>
where
    F: FnMut(SegmentVoxel) -> ControlFlow<()>,
{
    let start = grid.world_to_index(a).ok_or_else(|| out_of_bounds(a))?;
    let end = grid.world_to_index(b).ok_or_else(|| out_of_bounds(b))?;
    let inv_res = 1.0 / grid.resolution();
    let origin = grid.origin();
    let ga = (a - origin) * inv_res;
    let d = (b - a) * inv_res;

    let mut cell = start;
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for ax in 0..3 {
        if cell[ax] == end[ax] {
            continue;
        }
        if end[ax] > cell[ax] {
            step[ax] = 1;
            t_max[ax] = ((cell[ax] + 1) as f64 - ga[ax]) / d[ax];
        } else {
            step[ax] = -1;
            t_max[ax] = (cell[ax] as f64 - ga[ax]) / d[ax];
        }
        t_delta[ax] = 1.0 / d[ax].abs();
    }

    let mut t_enter = 0.0;
    loop {
        if cell == end {
            let _ = visit(SegmentVoxel {
                index: cell,
                t_enter,
                t_exit: 1.0,
            });
            return Ok(());
        }
        // Step along the axis whose boundary comes first; the index never moves past
        // the end cell on any axis, so the walk terminates exactly at `end`.
        let mut ax = 0;
        for k in 1..3 {
            if t_max[k] < t_max[ax] {
                ax = k;
            }
        }
        let t_exit = t_max[ax].clamp(t_enter, 1.0);
        if visit(SegmentVoxel {
            index: cell,
            t_enter,
            t_exit,
        })
        .is_break()
        {
            return Ok(());
        }
        t_enter = t_exit;
        cell[ax] = (cell[ax] as i64 + step[ax]) as usize;
        if cell[ax] == end[ax] {
            t_max[ax] = f64::INFINITY;
        } else {
            t_max[ax] += t_delta[ax];
        }
    }
}

/// Ordered list of voxels crossed by the segment `a -> b`.
pub fn traverse_segment(grid: &VoxelGrid, a: &Vec3, b: &Vec3) -> Result<Vec<Index3>, WorldError> {
    let mut out = Vec::new();
    for_each_segment_voxel(grid, a, b, |v| {
        out.push(v.index);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}
