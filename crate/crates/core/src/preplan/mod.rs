//! Viewpoint preplanning.
//!
//! For each of `N` future time steps a layer of candidate viewpoints is sampled around
//! the predicted target. A layered graph connects safe, short hops between consecutive
//! layers, weighted by hop length, an inverse visibility integral, and deviation from
//! the desired tracking distance. The cheapest path from the chaser's current position
//! becomes the viewpoint skeleton, and each hop is wrapped in a box corridor for the
//! smooth planner.

mod candidates;
mod corridor;
mod graph;

use serde::{Deserialize, Serialize};

use crate::prediction::{PredictionError, TargetPrediction};
use crate::scenario::ParamError;
use crate::world::{EsdfGrid, WorldError};
use crate::Vec3;

pub use candidates::{
    candidate_viewpoints, is_valid_viewpoint, lattice_candidates, layer_with_relaxation, ViewpointLayer,
};
pub use corridor::{corridor_for_segment, corridors_from_skeleton, Corridor, HalfSpace, FACE_CONSTRAINTS};
pub use graph::{
    build_graph, edge_visibility_cost, solve_layered, solve_viewpoint_sequence, Edge, LayeredGraph, NodeScores,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreplanError {
    #[error(transparent)]
    InvalidParams(#[from] ParamError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error("layer {layer} has no candidate viewpoints")]
    EmptyLayer { layer: usize },
    #[error("no feasible viewpoint sequence: layer {layer} is unreachable")]
    Unreachable { layer: usize },
}

impl PreplanError {
    /// Layer (1-based) at which the search failed, if the failure is an infeasibility.
    pub fn infeasible_layer(&self) -> Option<usize> {
        match self {
            Self::EmptyLayer { layer } | Self::Unreachable { layer } => Some(*layer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreplanParams {
    /// Layers per horizon (`N`).
    pub n_layers: usize,
    pub d_l: f64,
    pub d_u: f64,
    pub d_des: f64,
    /// Longest allowed hop between consecutive viewpoints.
    pub d_max: f64,
    pub w_v: f64,
    pub w_d: f64,
    pub r_safe: f64,
    /// Corridor half-width.
    pub r_c: f64,
    /// Spacing of the candidate lattice.
    pub grid_stride: f64,
    /// Line-of-sight elevation bounds in degrees.
    pub elev_min: f64,
    pub elev_max: f64,
    /// Trapezoid points per hop for the visibility integrals.
    pub edge_samples: usize,
    /// Lower bound applied to visibility scores inside hop costs. Unset, a hop whose
    /// visibility integral is not positive is absent; set, it is kept at a high cost.
    pub psi_floor: Option<f64>,
}

impl Default for PreplanParams {
    fn default() -> Self {
        Self {
            n_layers: 4,
            d_l: 1.0,
            d_u: 4.0,
            d_des: 2.5,
            d_max: 2.0,
            w_v: 5.0,
            w_d: 5.5,
            r_safe: 0.3,
            r_c: 0.2,
            grid_stride: 0.4,
            elev_min: 20.0,
            elev_max: 70.0,
            edge_samples: 2,
            psi_floor: None,
        }
    }
}

impl PreplanParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("preplan.d_l", self.d_l),
            ("preplan.d_max", self.d_max),
            ("preplan.r_c", self.r_c),
            ("preplan.grid_stride", self.grid_stride),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ParamError::new(&[name], format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("preplan.w_v", self.w_v), ("preplan.w_d", self.w_d)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ParamError::new(&[name], format!("must be non-negative, got {v}")));
            }
        }
        if !(self.d_l <= self.d_des && self.d_des <= self.d_u) || !self.d_u.is_finite() {
            return Err(ParamError::new(
                &["preplan.d_l", "preplan.d_des", "preplan.d_u"],
                format!(
                    "need d_l <= d_des <= d_u, got {} / {} / {}",
                    self.d_l, self.d_des, self.d_u
                ),
            ));
        }
        if !(self.r_c < self.r_safe) || !self.r_safe.is_finite() {
            return Err(ParamError::new(
                &["preplan.r_c", "preplan.r_safe"],
                format!("need r_c < r_safe, got r_c = {} and r_safe = {}", self.r_c, self.r_safe),
            ));
        }
        if !(self.elev_min < self.elev_max) || self.elev_min < -90.0 || self.elev_max > 90.0 {
            return Err(ParamError::new(
                &["preplan.elev_min", "preplan.elev_max"],
                format!(
                    "need -90 <= elev_min < elev_max <= 90, got {} and {}",
                    self.elev_min, self.elev_max
                ),
            ));
        }
        if self.n_layers == 0 {
            return Err(ParamError::new(&["preplan.n_layers"], "must be positive"));
        }
        if self.edge_samples < 2 {
            return Err(ParamError::new(&["preplan.edge_samples"], "must be at least 2"));
        }
        if let Some(f) = self.psi_floor {
            if !(f > 0.0) || !f.is_finite() {
                return Err(ParamError::new(
                    &["preplan.psi_floor"],
                    format!("must be positive, got {f}"),
                ));
            }
        }
        Ok(())
    }
}

/// Optimal viewpoint sequence `v_0 .. v_N` with `v_0` the chaser position at plan time.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointSkeleton {
    pub points: Vec<Vec3>,
    pub times: Vec<f64>,
    /// Predicted target position at each time.
    pub targets: Vec<Vec3>,
    /// Chosen candidate index in each layer (layers 1..N).
    pub choices: Vec<usize>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreplanOutput {
    pub layers: Vec<ViewpointLayer>,
    pub skeleton: ViewpointSkeleton,
    pub corridors: Vec<Corridor>,
    /// Hops whose full edge test (clearance and visibility) was evaluated.
    pub edges_evaluated: usize,
}

/// Clearance required along hops leaving the start node. A chaser that already sits
/// closer than `r_safe` to an obstacle may still leave along a segment no worse than
/// its current clearance.
pub fn start_clearance(esdf: &EsdfGrid, start: &Vec3, r_safe: f64) -> f64 {
    r_safe.min(esdf.phi_at(start))
}

/// How far a predicted target position inside an obstacle may be moved to free space.
const TARGET_ESCAPE: f64 = 1.0;

/// Full preplanning step from `t0` over `horizon` seconds. `lattice_offset` shifts the
/// candidate lattice (zero for the canonical lattice).
pub fn preplan(
    esdf: &EsdfGrid,
    start: &Vec3,
    prediction: &TargetPrediction,
    t0: f64,
    horizon: f64,
    params: &PreplanParams,
    lattice_offset: &Vec3,
) -> Result<PreplanOutput, PreplanError> {
    params.validate()?;
    esdf.try_phi_at(start)?;
    let n = params.n_layers;
    let mut times = vec![t0];
    // interpolation between knots can cut a corner through thin obstacles, and
    // nothing sees a point inside one
    let target_at = |t: f64| -> Result<Vec3, PreplanError> {
        let p = esdf.grid().clamp_point(&prediction.sample(t)?);
        Ok(esdf.nearest_clear(&p, esdf.resolution(), TARGET_ESCAPE).unwrap_or(p))
    };
    let mut targets = vec![target_at(t0)?];
    let mut layers = Vec::with_capacity(n);
    for k in 1..=n {
        let t = t0 + horizon * k as f64 / n as f64;
        let target = target_at(t)?;
        times.push(t);
        targets.push(target);
        let layer = layer_with_relaxation(esdf, k, t, &target, params, lattice_offset)?;
        layers.push(layer);
    }
    let (choices, total_cost, edges_evaluated) = solve_layered(esdf, start, &targets[0], &layers, params)?;
    let mut points = vec![*start];
    points.extend(choices.iter().zip(&layers).map(|(&c, l)| l.candidates[c]));
    let skeleton = ViewpointSkeleton {
        points,
        times,
        targets,
        choices,
        total_cost,
    };
    let corridors = corridors_from_skeleton(&skeleton, params.r_c);
    Ok(PreplanOutput {
        layers,
        skeleton,
        corridors,
        edges_evaluated,
    })
}
