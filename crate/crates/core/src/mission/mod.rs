//! Receding-horizon chasing loop, target simulation and run metrics.
//!
//! Each [`Mission::tick`] advances simulated time by `tick_dt`: the target moves (by
//! script or operator command), an observation is stored once per `obs_period`, the
//! prediction error is accumulated, the chaser follows its current plan exactly, the
//! active via-point is advanced, and a replan (predict, preplan, smooth) runs when
//! there is no plan, the accumulated error exceeds its tolerance, or the plan horizon
//! is mostly consumed.

mod metrics;
mod script;

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::{
    compute_metrics, Aggregates, MetricsLog, ReplanReason, TickRecord, METRICS_HEADER, TRAJECTORY_HEADER,
};
pub use script::{ScriptLeg, TargetScript};

use crate::prediction::{predict_target, ObservationBuffer, PredictionError, TargetPrediction};
use crate::preplan::{
    corridors_from_skeleton, is_valid_viewpoint, preplan, PreplanError, PreplanOutput, PreplanParams,
};
use crate::scenario::{ParamError, ScenarioConfig};
use crate::smooth::{plan_smooth, plan_yaw, ChaseTrajectory, InitState, SmoothParams};
use crate::visibility::{is_visible, visibility_score};
use crate::world::{EsdfGrid, WorldError};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionParams {
    /// Planning horizon `H` (seconds).
    pub horizon: f64,
    pub tick_dt: f64,
    /// Replan once the summed squared prediction error exceeds this (m²).
    pub accum_err_tol: f64,
    /// A via-point counts as reached within this distance (meters).
    pub via_tol: f64,
    /// Seconds between stored observations; `horizon / n_obs` when absent.
    pub obs_period: Option<f64>,
    pub time_limit: f64,
    /// Replan when this fraction of the current plan's horizon has elapsed.
    pub replan_fraction: f64,
    /// Clearance an operator-driven target keeps from obstacles (meters).
    pub target_clearance: f64,
    /// Below this speed a chaser already at a valid viewpoint of a resting target holds.
    pub hold_speed: f64,
}

impl Default for MissionParams {
    fn default() -> Self {
        Self {
            horizon: 4.0,
            tick_dt: 0.1,
            accum_err_tol: 1.0,
            via_tol: 0.5,
            obs_period: None,
            time_limit: 120.0,
            replan_fraction: 0.75,
            target_clearance: 0.2,
            hold_speed: 0.05,
        }
    }
}

impl MissionParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("mission.horizon", self.horizon),
            ("mission.tick_dt", self.tick_dt),
            ("mission.accum_err_tol", self.accum_err_tol),
            ("mission.via_tol", self.via_tol),
            ("mission.time_limit", self.time_limit),
            ("mission.obs_period", self.obs_period.unwrap_or(1.0)),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ParamError::new(&[name], format!("must be positive, got {v}")));
            }
        }
        if self.tick_dt > self.horizon {
            return Err(ParamError::new(
                &["mission.tick_dt", "mission.horizon"],
                "a tick must not be longer than the horizon",
            ));
        }
        if !(self.replan_fraction > 0.0 && self.replan_fraction <= 1.0) {
            return Err(ParamError::new(&["mission.replan_fraction"], "must lie in (0, 1]"));
        }
        if !(self.target_clearance >= 0.0) || !(self.hold_speed >= 0.0) {
            return Err(ParamError::new(
                &["mission.target_clearance", "mission.hold_speed"],
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MissionError {
    #[error(transparent)]
    InvalidParams(#[from] ParamError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("chaser start is in collision or too close to an obstacle (clearance {phi:.3} m)")]
    ChaserInCollision { phi: f64 },
    #[error("target is not visible from the chaser start")]
    TargetOccluded,
    #[error("{what} {index} lies outside free space")]
    Blocked { what: &'static str, index: usize },
    #[error("target leg {leg} passes through an obstacle")]
    LegBlocked { leg: usize },
}

/// How the target moves this tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TargetControl {
    #[default]
    Script,
    /// Planar velocity command (m/s); altitude is kept.
    Velocity { vx: f64, vy: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub target_pos: Vec3,
    pub chaser_pos: Vec3,
    pub chaser_vel: Vec3,
    pub chaser_acc: Vec3,
    pub yaw: f64,
    pub active_via: usize,
    pub prediction: Option<TargetPrediction>,
    pub trajectory: Option<ChaseTrajectory>,
    pub accum_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Replan {
        reason: ReplanReason,
        cost: f64,
        edges: usize,
        samples: usize,
        kkt: f64,
        /// Largest corridor violation at the constraint samples.
        sample_violation: f64,
        dense_violation: f64,
        /// Corridor width actually used, as a fraction of `r_c`.
        corridor_scale: f64,
        /// The first corridor's start face was moved back to leave room to brake.
        start_released: bool,
        /// Hop length limit actually used, as a multiple of `d_max`.
        hop_scale: f64,
        /// Visibility floor the preplan needed, if any.
        psi_floor: Option<f64>,
    },
    Hold {
        reason: ReplanReason,
    },
    ReplanFailed {
        reason: ReplanReason,
        stage: &'static str,
        error: String,
    },
    ViaReached {
        index: usize,
    },
    HideLeg {
        leg: usize,
    },
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl fmt::Display for MissionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={:.2} ", self.t)?;
        match &self.kind {
            EventKind::Replan {
                reason,
                cost,
                edges,
                samples,
                kkt,
                sample_violation,
                dense_violation,
                corridor_scale,
                start_released,
                hop_scale,
                psi_floor,
            } => {
                write!(
                    f,
                    "replan ({}) cost={cost:.4} edges={edges} samples={samples} kkt={kkt:.1e} sample_violation={sample_violation:.1e} dense_violation={dense_violation:.1e} corridor_scale={corridor_scale} start_released={start_released} hop_scale={hop_scale}",
                    reason.as_str()
                )?;
                match psi_floor {
                    Some(v) => write!(f, " psi_floor={v}"),
                    None => Ok(()),
                }
            }
            EventKind::Hold { reason } => write!(f, "hold ({}) target at rest", reason.as_str()),
            EventKind::ReplanFailed { reason, stage, error } => {
                write!(
                    f,
                    "replan failed ({}) in {stage}: {error}; holding position",
                    reason.as_str()
                )
            }
            EventKind::ViaReached { index } => write!(f, "via-point {} reached", index + 1),
            EventKind::HideLeg { leg } => write!(f, "target starts hiding leg {}", leg + 1),
            EventKind::Finished => write!(f, "final via-point reached"),
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MissionLog {
    pub metrics: MetricsLog,
    pub events: Vec<MissionEvent>,
    pub finished: bool,
    /// Wall-clock duration of every replan attempt (milliseconds). Not deterministic.
    pub replan_ms: Vec<f64>,
}

impl MissionLog {
    pub fn replans(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Replan { .. } | EventKind::Hold { .. }))
            .count()
    }

    pub fn failed_replans(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ReplanFailed { .. }))
            .count()
    }
}

/// Immutable inputs of one planning cycle.
#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub t: f64,
    pub observations: ObservationBuffer,
    pub goal: Vec3,
    pub chaser: InitState,
    pub yaw: f64,
    pub lattice_offset: Vec3,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub prediction: TargetPrediction,
    pub trajectory: ChaseTrajectory,
    /// Absent when the chaser simply holds for a resting target.
    pub preplan: Option<PreplanOutput>,
    pub samples: usize,
    pub kkt: f64,
    pub sample_violation: f64,
    pub dense_violation: f64,
    pub corridor_scale: f64,
    pub start_released: bool,
    pub hop_scale: f64,
    pub psi_floor: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PlanFailure {
    pub prediction: Option<Box<TargetPrediction>>,
    pub stage: &'static str,
    pub error: String,
}

/// Smallest obstacle clearance over samples `stride` apart; `-inf` once the trajectory
/// leaves the map.
pub fn trajectory_clearance(esdf: &EsdfGrid, traj: &ChaseTrajectory, stride: f64) -> f64 {
    let (t0, t1) = (traj.start_time(), traj.end_time());
    let steps = ((t1 - t0) / stride).ceil() as usize;
    (0..=steps)
        .map(|s| {
            let p = traj.state_at((t0 + stride * s as f64).min(t1)).0;
            esdf.try_phi_at(&p).unwrap_or(f64::NEG_INFINITY)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Corridor half-width as a fraction of `r_c`, and whether the first corridor's start
/// face is moved back by `d_max`. The last attempt lets a chaser whose velocity points
/// away from its first hop brake and turn before entering it.
const CORRIDOR_ATTEMPTS: [(f64, bool); 4] = [(1.0, false), (0.5, false), (0.25, false), (1.0, true)];
/// Preplan retries after an unreachable layer: a multiple of `d_max` for a chaser left
/// behind every first-layer viewpoint, then a visibility floor for targets predicted
/// to slip behind an obstacle between layers.
const PREPLAN_ATTEMPTS: [(f64, Option<f64>); 5] = [
    (1.0, None),
    (2.0, None),
    (4.0, None),
    (1.0, Some(PSI_FLOOR)),
    (4.0, Some(PSI_FLOOR)),
];
const PSI_FLOOR: f64 = 0.01;

/// One full predict, preplan, smooth cycle. Pure: the same request gives the same plan.
///
/// A plan is accepted only if the chaser keeps at least `r_c` clearance along it;
/// otherwise the corridors are narrowed and the smoothing retried.
pub fn plan_cycle(esdf: &EsdfGrid, config: &ScenarioConfig, req: &PlanRequest) -> Result<PlanResult, PlanFailure> {
    let fail = |prediction: Option<&TargetPrediction>, stage, error: String| PlanFailure {
        prediction: prediction.cloned().map(Box::new),
        stage,
        error,
    };
    let horizon = config.mission.horizon;
    let prediction = predict_target(&req.observations, &req.goal, esdf, &config.prediction)
        .map_err(|e: PredictionError| fail(None, "predict", e.to_string()))?;
    let pred = Some(&prediction);
    let target_now = prediction
        .sample(req.t)
        .map_err(|e| fail(pred, "predict", e.to_string()))?;

    if prediction.stationary
        && req.chaser.vel.norm() <= config.mission.hold_speed
        && is_valid_viewpoint(esdf, &target_now, &req.chaser.pos, &config.preplan, config.preplan.d_u).unwrap_or(false)
    {
        let mut trajectory = ChaseTrajectory::hold(req.chaser.pos, req.t, req.t + horizon, req.yaw);
        trajectory.yaw = plan_yaw(&trajectory, &prediction, config.smooth.yaw_stride, req.yaw);
        return Ok(PlanResult {
            prediction,
            trajectory,
            preplan: None,
            samples: 0,
            kkt: 0.0,
            sample_violation: 0.0,
            dense_violation: 0.0,
            corridor_scale: 0.0,
            start_released: false,
            hop_scale: 0.0,
            psi_floor: None,
        });
    }

    let mut attempts = PREPLAN_ATTEMPTS.iter().peekable();
    let (mut pre, hop_scale, psi_floor) = loop {
        let &(hop_scale, floor) = attempts.next().expect("at least one attempt");
        let params = PreplanParams {
            d_max: config.preplan.d_max * hop_scale,
            psi_floor: config.preplan.psi_floor.or(floor),
            ..config.preplan.clone()
        };
        match preplan(
            esdf,
            &req.chaser.pos,
            &prediction,
            req.t,
            horizon,
            &params,
            &req.lattice_offset,
        ) {
            Err(PreplanError::Unreachable { .. }) if attempts.peek().is_some() => {}
            other => {
                let pre = other.map_err(|e| fail(pred, "preplan", e.to_string()))?;
                break (pre, hop_scale, params.psi_floor);
            }
        }
    };

    let r_c = config.preplan.r_c;
    let stride = (config.mission.tick_dt / 2.0).min(0.05);
    let mut last_error = String::new();
    for (scale, release) in CORRIDOR_ATTEMPTS {
        let mut corridors = if scale == 1.0 {
            pre.corridors.clone()
        } else {
            corridors_from_skeleton(&pre.skeleton, r_c * scale)
        };
        if release {
            corridors[0].extend_start(config.preplan.d_max);
        }
        let params = SmoothParams {
            side_shrink: config.smooth.side_shrink * scale,
            ..config.smooth.clone()
        };
        let out = match plan_smooth(&corridors, &pre.skeleton, &req.chaser, &params) {
            Ok(out) => out,
            Err(e) => {
                last_error = e.to_string();
                continue;
            }
        };
        let clearance = trajectory_clearance(esdf, &out.trajectory, stride);
        if clearance < r_c {
            last_error = format!("trajectory clearance {clearance:.3} m is below r_c");
            continue;
        }
        pre.corridors = corridors;
        let mut trajectory = out.trajectory;
        trajectory.yaw = plan_yaw(&trajectory, &prediction, config.smooth.yaw_stride, req.yaw);
        return Ok(PlanResult {
            prediction,
            trajectory,
            samples: out.samples,
            kkt: out.residuals.max(),
            sample_violation: out.sample_violation.max(0.0),
            dense_violation: out.dense_violation,
            corridor_scale: scale,
            start_released: release,
            hop_scale,
            psi_floor,
            preplan: Some(pre),
        });
    }
    Err(fail(pred, "smooth", last_error))
}

pub struct Mission {
    esdf: Arc<EsdfGrid>,
    config: ScenarioConfig,
    obs_period: f64,
    state: WorldState,
    observations: ObservationBuffer,
    next_obs: f64,
    plan_start: f64,
    preplan: Option<PreplanOutput>,
    log: MissionLog,
    rng: Option<ChaCha8Rng>,
    ticks: u64,
    leg: Option<usize>,
    control: TargetControl,
}

fn check_free(esdf: &EsdfGrid, p: &Vec3, what: &'static str, index: usize) -> Result<(), MissionError> {
    match esdf.try_phi_at(p) {
        Ok(phi) if phi > 0.0 => Ok(()),
        _ => Err(MissionError::Blocked { what, index }),
    }
}

impl Mission {
    pub fn new(esdf: Arc<EsdfGrid>, config: ScenarioConfig) -> Result<Self, MissionError> {
        config.validate()?;
        for (i, g) in config.via_points.iter().enumerate() {
            check_free(&esdf, g, "via-point", i + 1)?;
        }
        for (i, w) in config.target.waypoints().enumerate() {
            check_free(&esdf, &w, "target waypoint", i)?;
        }
        let waypoints: Vec<Vec3> = config.target.waypoints().collect();
        for (i, w) in waypoints.windows(2).enumerate() {
            if !is_visible(esdf.grid(), &w[0], &w[1])? {
                return Err(MissionError::LegBlocked { leg: i + 1 });
            }
        }
        let chaser = config.chaser.position;
        let phi = esdf.try_phi_at(&chaser)?;
        if phi < config.preplan.r_c {
            return Err(MissionError::ChaserInCollision { phi });
        }
        let target = config.target.start;
        if !is_visible(esdf.grid(), &chaser, &target)? {
            return Err(MissionError::TargetOccluded);
        }
        let n_obs = config.prediction.n_obs;
        let obs_period = config
            .mission
            .obs_period
            .unwrap_or(config.mission.horizon / n_obs as f64);
        // the target is taken to have rested at its start before the mission
        let mut observations = ObservationBuffer::new(n_obs);
        for i in 0..n_obs {
            let t = -((n_obs - 1 - i) as f64) * obs_period;
            observations.push(t, target).expect("increasing seed times");
        }
        let state = WorldState {
            t: 0.0,
            target_pos: target,
            chaser_pos: chaser,
            chaser_vel: Vec3::zeros(),
            chaser_acc: Vec3::zeros(),
            yaw: config.chaser.yaw,
            active_via: 0,
            prediction: None,
            trajectory: None,
            accum_err: 0.0,
        };
        Ok(Self {
            rng: config.seed.map(ChaCha8Rng::seed_from_u64),
            log: MissionLog {
                metrics: MetricsLog::new(config.mission.tick_dt),
                ..Default::default()
            },
            esdf,
            config,
            obs_period,
            state,
            observations,
            next_obs: obs_period,
            plan_start: 0.0,
            preplan: None,
            ticks: 0,
            leg: None,
            control: TargetControl::Script,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn esdf(&self) -> &Arc<EsdfGrid> {
        &self.esdf
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn log(&self) -> &MissionLog {
        &self.log
    }

    pub fn into_log(self) -> MissionLog {
        self.log
    }

    /// Preplanner output behind the current trajectory, if it came from a full replan.
    pub fn current_preplan(&self) -> Option<&PreplanOutput> {
        self.preplan.as_ref()
    }

    pub fn finished(&self) -> bool {
        self.log.finished
    }

    pub fn obs_period(&self) -> f64 {
        self.obs_period
    }

    fn event(&mut self, kind: EventKind) {
        self.log.events.push(MissionEvent { t: self.state.t, kind });
    }

    fn move_target(&mut self, t: f64, control: TargetControl) {
        match control {
            TargetControl::Script => {
                self.state.target_pos = self.config.target.position(t);
                let leg = self.config.target.leg_at(t);
                if leg != self.leg {
                    if let Some(i) = leg.filter(|&i| self.config.target.legs[i].hide) {
                        self.event(EventKind::HideLeg { leg: i });
                    }
                    self.leg = leg;
                }
            }
            TargetControl::Velocity { vx, vy } => {
                let dt = self.config.mission.tick_dt;
                let p = self.state.target_pos;
                let clear = self.config.mission.target_clearance;
                let ok = |q: &Vec3| self.esdf.try_phi_at(q).is_ok_and(|phi| phi >= clear);
                // slide along obstacles: full step, then each axis alone
                let moves = [
                    Vec3::new(vx * dt, vy * dt, 0.0),
                    Vec3::new(vx * dt, 0.0, 0.0),
                    Vec3::new(0.0, vy * dt, 0.0),
                ];
                if let Some(m) = moves.iter().find(|m| ok(&(p + *m))) {
                    self.state.target_pos = p + m;
                }
            }
        }
    }

    fn goal(&self) -> Vec3 {
        match self.control {
            TargetControl::Script => self.config.via_points[self.state.active_via],
            TargetControl::Velocity { .. } => {
                // no known destination: extrapolate the observed motion over the horizon
                let obs: Vec<_> = self.observations.iter().collect();
                let (a, b) = (obs[obs.len() - 2], obs[obs.len() - 1]);
                let v = (b.position - a.position) / (b.t - a.t);
                let mut goal = self
                    .esdf
                    .grid()
                    .clamp_point(&(b.position + v * self.config.mission.horizon));
                goal.z = b.position.z;
                goal
            }
        }
    }

    fn lattice_offset(&mut self) -> Vec3 {
        let half = self.config.preplan.grid_stride / 2.0;
        match self.rng.as_mut() {
            Some(rng) => Vec3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            ),
            None => Vec3::zeros(),
        }
    }

    fn replan(&mut self, reason: ReplanReason) -> bool {
        let req = PlanRequest {
            t: self.state.t,
            observations: self.observations.clone(),
            goal: self.goal(),
            chaser: InitState {
                pos: self.state.chaser_pos,
                vel: self.state.chaser_vel,
                acc: self.state.chaser_acc,
            },
            yaw: self.state.yaw,
            lattice_offset: self.lattice_offset(),
        };
        let started = Instant::now();
        let result = plan_cycle(&self.esdf, &self.config, &req);
        self.log.replan_ms.push(started.elapsed().as_secs_f64() * 1e3);
        match result {
            Ok(plan) => {
                let kind = match &plan.preplan {
                    Some(pre) => EventKind::Replan {
                        reason,
                        cost: pre.skeleton.total_cost,
                        edges: pre.edges_evaluated,
                        samples: plan.samples,
                        kkt: plan.kkt,
                        sample_violation: plan.sample_violation,
                        dense_violation: plan.dense_violation,
                        corridor_scale: plan.corridor_scale,
                        start_released: plan.start_released,
                        hop_scale: plan.hop_scale,
                        psi_floor: plan.psi_floor,
                    },
                    None => EventKind::Hold { reason },
                };
                self.state.prediction = Some(plan.prediction);
                self.state.trajectory = Some(plan.trajectory);
                self.preplan = plan.preplan;
                self.state.accum_err = 0.0;
                self.plan_start = self.state.t;
                self.event(kind);
                true
            }
            Err(failure) => {
                if let Some(pred) = failure.prediction {
                    self.state.prediction = Some(*pred);
                }
                self.state.trajectory = None;
                self.preplan = None;
                self.state.chaser_vel = Vec3::zeros();
                self.state.chaser_acc = Vec3::zeros();
                self.event(EventKind::ReplanFailed {
                    reason,
                    stage: failure.stage,
                    error: failure.error,
                });
                false
            }
        }
    }

    /// Advances the simulation by one tick and returns its record.
    pub fn tick(&mut self, control: TargetControl) -> &TickRecord {
        self.control = control;
        self.ticks += 1;
        let t = self.ticks as f64 * self.config.mission.tick_dt;
        self.state.t = t;
        self.move_target(t, control);
        let target = self.state.target_pos;

        if t >= self.next_obs - 1e-9 {
            self.observations.push(t, target).expect("observation times increase");
            self.next_obs += self.obs_period;
        }
        if let Some(pred) = &self.state.prediction {
            let predicted = pred.sample(t).unwrap_or(pred.points[0]);
            self.state.accum_err += (predicted - target).norm_squared();
        }
        let accum_err = self.state.accum_err;

        let prev = self.state.chaser_pos;
        if let Some(traj) = &self.state.trajectory {
            let (p, v, a) = traj.state_at(t);
            self.state.chaser_pos = p;
            self.state.chaser_vel = v;
            self.state.chaser_acc = a;
            self.state.yaw = traj.yaw_at(t);
        }

        let last_via = self.config.via_points.len() - 1;
        let via = self.state.active_via;
        if !self.log.finished && (target - self.config.via_points[via]).norm() < self.config.mission.via_tol {
            self.event(EventKind::ViaReached { index: via });
            if via < last_via {
                self.state.active_via += 1;
            } else if control == TargetControl::Script {
                self.log.finished = true;
                self.event(EventKind::Finished);
            }
        }

        let mp = &self.config.mission;
        let reason = if self.state.trajectory.is_none() {
            Some(ReplanReason::NoPlan)
        } else if self.state.accum_err > mp.accum_err_tol {
            Some(ReplanReason::AccumErr)
        } else if t - self.plan_start >= mp.replan_fraction * mp.horizon - 1e-9 {
            Some(ReplanReason::Horizon)
        } else {
            None
        };
        let infeasible = match reason {
            Some(r) if !self.log.finished => !self.replan(r),
            _ => false,
        };

        let grid = self.esdf.grid();
        let chaser = self.state.chaser_pos;
        let (c, p) = (grid.clamp_point(&chaser), grid.clamp_point(&target));
        let record = TickRecord {
            t,
            target,
            chaser,
            chaser_vel: self.state.chaser_vel,
            yaw: self.state.yaw,
            phi_target: self.esdf.phi_at(&target),
            phi_chaser: self.esdf.phi_at(&chaser),
            psi: visibility_score(&self.esdf, &c, &p).unwrap_or(f64::NEG_INFINITY),
            visible: is_visible(grid, &c, &p).unwrap_or(false),
            step: (chaser - prev).norm(),
            accum_err,
            via: self.state.active_via,
            replan: reason.filter(|_| !self.log.finished || infeasible),
            infeasible,
        };
        self.log.metrics.records.push(record);
        self.log.metrics.records.last().unwrap()
    }

    /// Runs scripted ticks until the final via-point is reached or time runs out.
    pub fn run(&mut self) {
        while !self.log.finished && self.state.t < self.config.mission.time_limit - 1e-9 {
            self.tick(TargetControl::Script);
        }
    }
}

/// Headless run of a scenario on a prepared world.
pub fn run_mission(esdf: Arc<EsdfGrid>, config: ScenarioConfig) -> Result<MissionLog, MissionError> {
    let mut mission = Mission::new(esdf, config)?;
    mission.run();
    Ok(mission.into_log())
}
