//! Line-of-sight tests and the visibility score ψ: the smallest signed distance met
//! along the segment between a vantage point and the target.

use std::io::{self, Write};
use std::ops::ControlFlow;

use crate::world::{for_each_segment_voxel, EsdfGrid, VoxelGrid, WorldError};
use crate::Vec3;

/// True when no voxel crossed by the segment is occupied.
pub fn is_visible(grid: &VoxelGrid, from: &Vec3, to: &Vec3) -> Result<bool, WorldError> {
    let mut visible = true;
    for_each_segment_voxel(grid, from, to, |v| {
        if grid.is_occupied(v.index) {
            visible = false;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(visible)
}

/// Minimum of the distance field along the segment, sampled at both endpoints and at
/// `subdivisions` evenly spaced points of each crossed voxel's chord. Occupied voxels
/// contribute their own (negative) center value, so a blocked segment always scores
/// at most zero.
pub fn min_phi_along(esdf: &EsdfGrid, a: &Vec3, b: &Vec3, subdivisions: usize) -> Result<f64, WorldError> {
    let mut min = esdf.phi_at(a).min(esdf.phi_at(b));
    scan_segment(esdf, a, b, subdivisions, |phi| {
        min = min.min(phi);
        ControlFlow::Continue(())
    })?;
    Ok(min)
}

/// Early-exit form of `min_phi_along(..) >= threshold` with one sample per voxel.
pub fn segment_clear(esdf: &EsdfGrid, a: &Vec3, b: &Vec3, threshold: f64) -> Result<bool, WorldError> {
    if esdf.phi_at(a) < threshold || esdf.phi_at(b) < threshold {
        // Still validate the endpoints.
        esdf.try_phi_at(a)?;
        esdf.try_phi_at(b)?;
        return Ok(false);
    }
    let mut clear = true;
    scan_segment(esdf, a, b, 1, |phi| {
        if phi < threshold {
            clear = false;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(clear)
}

fn scan_segment<F>(esdf: &EsdfGrid, a: &Vec3, b: &Vec3, subdivisions: usize, mut f: F) -> Result<(), WorldError>
where
    F: FnMut(f64) -> ControlFlow<()>,
{
    let n = subdivisions.max(1);
    let grid = esdf.grid();
    let d = b - a;
    for_each_segment_voxel(grid, a, b, |v| {
        let mut local = f64::INFINITY;
        for s in 0..n {
            let t = v.t_enter + (v.t_exit - v.t_enter) * (s as f64 + 0.5) / n as f64;
            local = local.min(esdf.phi_at(&(a + d * t)));
        }
        if grid.is_occupied(v.index) {
            local = local.min(esdf.phi_voxel(v.index));
        }
        f(local)
    })
}

/// Visibility score ψ(x_c; x_p) with one sample per crossed voxel.
pub fn visibility_score(esdf: &EsdfGrid, chaser: &Vec3, target: &Vec3) -> Result<f64, WorldError> {
    min_phi_along(esdf, chaser, target, 1)
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub position: Vec3,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("empty sampling region")]
    EmptyRegion,
    #[error("sampling stride must be positive, got {0}")]
    BadStride(f64),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Samples ψ(·; target) on a regular lattice covering `region` (x fastest, z slowest).
pub fn visibility_field(
    esdf: &EsdfGrid,
    target: &Vec3,
    region: &Aabb,
    stride: f64,
) -> Result<Vec<FieldSample>, FieldError> {
    if !(stride > 0.0) || !stride.is_finite() {
        return Err(FieldError::BadStride(stride));
    }
    if (0..3).any(|a| !(region.min[a] <= region.max[a])) {
        return Err(FieldError::EmptyRegion);
    }
    let count = |a: usize| ((region.max[a] - region.min[a]) / stride + 1e-9).floor() as usize + 1;
    let (nx, ny, nz) = (count(0), count(1), count(2));
    let mut out = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = region.min + Vec3::new(i as f64, j as f64, k as f64) * stride;
                let psi = visibility_score(esdf, &p, target)?;
                out.push(FieldSample { position: p, psi });
            }
        }
    }
    Ok(out)
}

/// Writes `x,y,z,psi` rows with a header line.
pub fn write_field_csv<W: Write>(samples: &[FieldSample], mut out: W) -> io::Result<()> {
    writeln!(out, "x,y,z,psi")?;
    for s in samples {
        writeln!(out, "{},{},{},{}", s.position.x, s.position.y, s.position.z, s.psi)?;
    }
    Ok(())
}
