use crate::visibility::{is_visible, visibility_score};
use crate::world::{EsdfGrid, WorldError};
use crate::Vec3;

use super::{PreplanError, PreplanParams};

/// Candidate viewpoints `V_k` for one future time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointLayer {
    /// 1-based layer index.
    pub k: usize,
    pub time: f64,
    pub target: Vec3,
    pub candidates: Vec<Vec3>,
    /// Visibility score of each candidate against this layer's target.
    pub scores: Vec<f64>,
    /// The tracking-distance upper bound had to be widened to find candidates.
    pub relaxed: bool,
}

impl ViewpointLayer {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Whether `p` satisfies every viewpoint predicate for `target` with the given
/// distance bounds. Checks run cheapest first.
pub fn is_valid_viewpoint(
    esdf: &EsdfGrid,
    target: &Vec3,
    p: &Vec3,
    params: &PreplanParams,
    d_u: f64,
) -> Result<bool, WorldError> {
    let tol = 1e-9;
    let rel = p - target;
    let dist = rel.norm();
    if dist < params.d_l - tol || dist > d_u + tol || dist == 0.0 {
        return Ok(false);
    }
    let sin_elev = rel.z / dist;
    if sin_elev < params.elev_min.to_radians().sin() - tol || sin_elev > params.elev_max.to_radians().sin() + tol {
        return Ok(false);
    }
    let grid = esdf.grid();
    // the map boundary counts as an obstacle
    let (lo, hi) = (grid.min_corner(), grid.max_corner());
    let inset = (0..3).all(|a| p[a] - lo[a] >= params.r_safe && hi[a] - p[a] >= params.r_safe);
    if !inset || esdf.phi_at(p) < params.r_safe {
        return Ok(false);
    }
    is_visible(grid, p, target)
}

/// Lattice points `target + offset + stride (i, j, k)` that pass [`is_valid_viewpoint`].
/// Ordered lexicographically by `(i, j, k)`.
pub fn lattice_candidates(
    esdf: &EsdfGrid,
    target: &Vec3,
    params: &PreplanParams,
    d_u: f64,
    offset: &Vec3,
) -> Result<Vec<Vec3>, WorldError> {
    let stride = params.grid_stride;
    let reach = (d_u / stride).ceil() as i64 + 1;
    let mut out = Vec::new();
    for i in -reach..=reach {
        for j in -reach..=reach {
            for k in -reach..=reach {
                let c = target + Vec3::new(i as f64, j as f64, k as f64) * stride + offset;
                if is_valid_viewpoint(esdf, target, &c, params, d_u)? {
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

pub fn candidate_viewpoints(
    esdf: &EsdfGrid,
    k: usize,
    time: f64,
    target: &Vec3,
    params: &PreplanParams,
    offset: &Vec3,
) -> Result<ViewpointLayer, PreplanError> {
    let candidates = lattice_candidates(esdf, target, params, params.d_u, offset)?;
    if candidates.is_empty() {
        return Err(PreplanError::EmptyLayer { layer: k });
    }
    let scores = candidates
        .iter()
        .map(|c| visibility_score(esdf, c, target))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ViewpointLayer {
        k,
        time,
        target: *target,
        candidates,
        scores,
        relaxed: false,
    })
}

/// Samples a layer, widening `d_u` by half once if the first attempt is empty.
pub fn layer_with_relaxation(
    esdf: &EsdfGrid,
    k: usize,
    time: f64,
    target: &Vec3,
    params: &PreplanParams,
    offset: &Vec3,
) -> Result<ViewpointLayer, PreplanError> {
    match candidate_viewpoints(esdf, k, time, target, params, offset) {
        Err(PreplanError::EmptyLayer { .. }) => {
            let relaxed = PreplanParams {
                d_u: params.d_u * 1.5,
                ..params.clone()
            };
            let mut layer = candidate_viewpoints(esdf, k, time, target, &relaxed, offset)?;
            layer.relaxed = true;
            Ok(layer)
        }
        other => other,
    }
}
