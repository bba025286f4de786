//! Smooth trajectory generation inside the chasing corridors.
//!
//! Each hop of the viewpoint skeleton becomes one polynomial segment. The QP minimizes
//! integrated squared jerk plus a soft pull of every segment end toward its viewpoint,
//! subject to the initial state, C² continuity, and corridor membership at sampled
//! times. Yaw is derived afterwards so the camera faces the predicted target.

mod build;
mod poly;
mod qp;

use serde::{Deserialize, Serialize};

use crate::prediction::TargetPrediction;
use crate::preplan::{Corridor, ViewpointSkeleton};
use crate::scenario::ParamError;
use crate::Vec3;

pub use build::{build_qp, var_index};
pub use poly::{basis_row, falling_factorial, jerk_gram, ChaseTrajectory};
pub use qp::{kkt_residuals, solve_qp, KktResiduals, QpError, QpProblem, QpSolution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SmoothError {
    #[error(transparent)]
    InvalidParams(#[from] ParamError),
    #[error("skeleton has {segments} segments but {corridors} corridors were given")]
    Mismatch { segments: usize, corridors: usize },
    #[error("segment {segment} has non-positive duration")]
    DegenerateSegment { segment: usize },
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("QP solution is inaccurate: KKT residual {residual:e} exceeds tolerance")]
    Inaccurate { residual: f64 },
    #[error("time {tau} outside trajectory domain [{start}, {end}]")]
    OutOfRange { tau: f64, start: f64, end: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothParams {
    /// Polynomial order `K` per segment.
    pub order: usize,
    /// Weight pulling segment ends toward the viewpoints.
    pub lambda: f64,
    /// Corridor constraint samples per segment, endpoints included.
    pub samples_per_segment: usize,
    pub kkt_tol: f64,
    /// Tightening of the corridor side faces at the samples (meters).
    pub side_shrink: f64,
    /// Yaw sampling period (seconds).
    pub yaw_stride: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        Self {
            order: 6,
            lambda: 0.5,
            samples_per_segment: 8,
            kkt_tol: 1e-6,
            side_shrink: 1e-3,
            yaw_stride: 0.1,
        }
    }
}

impl SmoothParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.order < 5 {
            return Err(ParamError::new(
                &["smooth.order"],
                format!("must be at least 5, got {}", self.order),
            ));
        }
        for (name, v) in [
            ("smooth.lambda", self.lambda),
            ("smooth.kkt_tol", self.kkt_tol),
            ("smooth.yaw_stride", self.yaw_stride),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ParamError::new(&[name], format!("must be positive, got {v}")));
            }
        }
        if !(self.side_shrink >= 0.0) {
            return Err(ParamError::new(&["smooth.side_shrink"], "must be non-negative"));
        }
        if self.samples_per_segment < 2 {
            return Err(ParamError::new(&["smooth.samples_per_segment"], "must be at least 2"));
        }
        Ok(())
    }
}

/// Chaser state the new trajectory must start from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub acc: Vec3,
}

impl InitState {
    pub fn at_rest(pos: Vec3) -> Self {
        Self {
            pos,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOutput {
    pub trajectory: ChaseTrajectory,
    pub residuals: KktResiduals,
    /// Jerk integral plus viewpoint deviation at the optimum.
    pub objective: f64,
    /// Constraint samples per segment actually used.
    pub samples: usize,
    /// Largest violation of the corridor constraints at the sample times.
    pub sample_violation: f64,
    /// Largest violation on a dense re-check between samples.
    pub dense_violation: f64,
}

fn corridor_violation(traj: &ChaseTrajectory, corridors: &[Corridor], per_segment: usize) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (k, c) in corridors.iter().enumerate() {
        let (t0, t1) = (traj.knots[k], traj.knots[k + 1]);
        for s in 0..per_segment {
            let tau = t0 + (t1 - t0) * s as f64 / (per_segment - 1) as f64;
            let local = tau - t0;
            let p = traj.segments[k]
                .iter()
                .enumerate()
                .fold(Vec3::zeros(), |acc, (i, c)| acc + c * local.powi(i as i32));
            worst = worst.max(c.max_violation(&p));
        }
    }
    worst
}

fn solve_with_samples(
    corridors: &[Corridor],
    skeleton: &ViewpointSkeleton,
    init: &InitState,
    params: &SmoothParams,
    samples: usize,
) -> Result<SmoothOutput, SmoothError> {
    let qp = build_qp(corridors, skeleton, init, params, samples)?;
    let sol = solve_qp(&qp)?;
    if sol.residuals.max() > params.kkt_tol {
        return Err(SmoothError::Inaccurate {
            residual: sol.residuals.max(),
        });
    }
    let order = params.order;
    let segments = (0..corridors.len())
        .map(|k| {
            (0..=order)
                .map(|i| {
                    Vec3::new(
                        sol.x[var_index(order, k, 0, i)],
                        sol.x[var_index(order, k, 1, i)],
                        sol.x[var_index(order, k, 2, i)],
                    )
                })
                .collect()
        })
        .collect();
    let trajectory = ChaseTrajectory {
        knots: skeleton.times.clone(),
        segments,
        yaw: Vec::new(),
    };
    let constant: f64 = skeleton.points[1..]
        .iter()
        .map(|v| params.lambda * v.norm_squared())
        .sum();
    let sample_violation = {
        let slack = &qp.a_in * &sol.x - &qp.b_in;
        slack.iter().fold(0.0f64, |m, v| m.max(*v))
    };
    let dense_violation = corridor_violation(&trajectory, corridors, 16 * (samples - 1) + 1).max(0.0);
    Ok(SmoothOutput {
        trajectory,
        residuals: sol.residuals,
        objective: sol.objective + constant,
        samples,
        sample_violation,
        dense_violation,
    })
}

/// Solves for the trajectory; if a dense re-check finds the corridors violated between
/// samples, the sample count is doubled once.
pub fn plan_smooth(
    corridors: &[Corridor],
    skeleton: &ViewpointSkeleton,
    init: &InitState,
    params: &SmoothParams,
) -> Result<SmoothOutput, SmoothError> {
    let m = params.samples_per_segment;
    let first = solve_with_samples(corridors, skeleton, init, params, m)?;
    if first.dense_violation <= params.kkt_tol {
        return Ok(first);
    }
    match solve_with_samples(corridors, skeleton, init, params, 2 * m) {
        Ok(second) => Ok(second),
        Err(_) => Ok(first),
    }
}

fn wrap_pi(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    }
    r
}

/// Heading from the chaser toward the predicted target every `stride` seconds over the
/// trajectory, unwrapped to be continuous starting from `prev_yaw`. When the target
/// is directly above or below the chaser, the previous heading is held.
pub fn plan_yaw(traj: &ChaseTrajectory, pred: &TargetPrediction, stride: f64, prev_yaw: f64) -> Vec<(f64, f64)> {
    let (t0, t1) = (traj.start_time(), traj.end_time());
    let steps = (((t1 - t0) / stride) - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut prev = prev_yaw;
    for s in 0..=steps {
        let tau = (t0 + stride * s as f64).min(t1);
        let xc = traj.state_at(tau).0;
        let xp = pred.sample(tau).unwrap_or(pred.points[0]);
        let d = xp - xc;
        let yaw = if d.x.hypot(d.y) < 1e-9 {
            prev
        } else {
            prev + wrap_pi(d.y.atan2(d.x) - prev)
        };
        out.push((tau, yaw));
        prev = yaw;
    }
    out
}
