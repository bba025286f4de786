//! Target trajectory forecasting.
//!
//! A geometric path `z_1 .. z_NT` is fitted to the last `N_o` observations under a
//! second-difference smoothness prior, pinned to the next via-point, and pushed out of
//! obstacles by a CHOMP-style cost on the signed distance field. The minimization uses
//! covariant gradient steps preconditioned by the prior's normal matrix. Knot times are
//! then assigned at the observed average speed and the path is linearly interpolated.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::scenario::ParamError;
use crate::world::EsdfGrid;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictionError {
    #[error("observation buffer holds {have} samples, prediction needs {need}")]
    NotEnoughObservations { have: usize, need: usize },
    #[error("observation time {t} does not follow previous time {last}")]
    NonIncreasingTime { t: f64, last: f64 },
    #[error(transparent)]
    InvalidParams(#[from] ParamError),
    #[error("prior normal matrix is singular")]
    SingularPrior,
    #[error("prediction objective became non-finite")]
    NonFinite,
    #[error("target did not move during the observation window")]
    StationaryTarget,
    #[error("query time {tau} precedes the first knot {t0}")]
    BeforeStart { tau: f64, t0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub position: Vec3,
}

/// Sliding window of the most recent target observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBuffer {
    capacity: usize,
    samples: VecDeque<Observation>,
}

impl ObservationBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            samples: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn latest(&self) -> Option<&Observation> {
        self.samples.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.samples.iter()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Appends an observation, evicting the oldest once full.
    pub fn push(&mut self, t: f64, position: Vec3) -> Result<(), PredictionError> {
        if let Some(last) = self.samples.back() {
            if !(t > last.t) {
                return Err(PredictionError::NonIncreasingTime { t, last: last.t });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(Observation { t, position });
        Ok(())
    }

    /// Average speed over the window: travelled polyline length over elapsed time.
    pub fn average_speed(&self) -> f64 {
        let (Some(first), Some(last)) = (self.samples.front(), self.samples.back()) else {
            return 0.0;
        };
        let elapsed = last.t - first.t;
        if elapsed <= 0.0 {
            return 0.0;
        }
        let length: f64 = self
            .samples
            .iter()
            .zip(self.samples.iter().skip(1))
            .map(|(a, b)| (b.position - a.position).norm())
            .sum();
        length / elapsed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionParams {
    /// Recency weight: observation `n` (most recent has the largest `n`) is weighted by `exp(gamma n)`.
    pub gamma: f64,
    /// Weight of the prior term relative to the obstacle term.
    pub rho: f64,
    /// Observations used per prediction (`N_o`).
    pub n_obs: usize,
    /// Total path points (`N_T`), including the observed ones.
    pub n_total: usize,
    /// Covariant step size. `1 / rho` makes the prior part a full Newton step.
    pub alpha: f64,
    pub max_iters: usize,
    /// Obstacle influence distance of the path cost (meters).
    pub eps_chomp: f64,
    /// Stop once an accepted step lowers the objective by less than this.
    pub converge_tol: f64,
    /// Row weight pinning the last path point to the via-point.
    pub goal_weight: f64,
    /// Scale each second difference by the knot intervals (observation stamps, then
    /// the constant-speed times of the initial path) so that a constant-velocity path
    /// has zero prior cost even when its knots are unevenly spaced. With `false` the
    /// rows are plain `z_n − 2 z_{n+1} + z_{n+2}`.
    pub time_scaled_prior: bool,
}

impl Default for PredictionParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            rho: 0.2,
            n_obs: 4,
            n_total: 7,
            alpha: 5.0,
            max_iters: 50,
            eps_chomp: 1.0,
            converge_tol: 1e-9,
            goal_weight: 1e3,
            time_scaled_prior: true,
        }
    }
}

impl PredictionParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("prediction.gamma", self.gamma),
            ("prediction.rho", self.rho),
            ("prediction.alpha", self.alpha),
            ("prediction.eps_chomp", self.eps_chomp),
            ("prediction.goal_weight", self.goal_weight),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ParamError::new(&[name], format!("must be positive, got {v}")));
            }
        }
        if self.converge_tol < 0.0 {
            return Err(ParamError::new(&["prediction.converge_tol"], "must be non-negative"));
        }
        if self.n_obs < 2 {
            return Err(ParamError::new(&["prediction.n_obs"], "must be at least 2"));
        }
        if self.n_total <= self.n_obs {
            return Err(ParamError::new(
                &["prediction.n_total", "prediction.n_obs"],
                format!("n_total ({}) must exceed n_obs ({})", self.n_total, self.n_obs),
            ));
        }
        if self.max_iters == 0 {
            return Err(ParamError::new(&["prediction.max_iters"], "must be positive"));
        }
        Ok(())
    }
}

/// The quadratic prior in least-squares form: `½‖A ξ − b‖²` with `ξ` stacked as an
/// `N_T × 3` matrix (each axis shares the same scalar operator `A`).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub n_obs: usize,
}

impl PriorSystem {
    /// Number of block rows (observation + second-difference + goal).
    pub fn block_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cost(&self, xi: &DMatrix<f64>) -> f64 {
        0.5 * (&self.a * xi - &self.b).norm_squared()
    }
}

pub fn assemble_prior(
    obs: &ObservationBuffer,
    goal: &Vec3,
    params: &PredictionParams,
) -> Result<PriorSystem, PredictionError> {
    params.validate()?;
    if obs.len() != params.n_obs {
        return Err(PredictionError::NotEnoughObservations {
            have: obs.len(),
            need: params.n_obs,
        });
    }
    let n_obs = params.n_obs;
    let n_total = params.n_total;
    let rows = n_obs + (n_total - 2) + 1;
    let mut a = DMatrix::zeros(rows, n_total);
    let mut b = DMatrix::zeros(rows, 3);
    for (i, o) in obs.iter().enumerate() {
        let w = (params.gamma * (i + 1) as f64).exp().sqrt();
        a[(i, i)] = w;
        for ax in 0..3 {
            b[(i, ax)] = w * o.position[ax];
        }
    }
    let h = if params.time_scaled_prior {
        knot_intervals(obs, goal, n_total)
    } else {
        vec![1.0; n_total - 1]
    };
    for n in 0..n_total - 2 {
        let r = n_obs + n;
        a[(r, n)] = 1.0 / h[n];
        a[(r, n + 1)] = -1.0 / h[n] - 1.0 / h[n + 1];
        a[(r, n + 2)] = 1.0 / h[n + 1];
    }
    let r = rows - 1;
    a[(r, n_total - 1)] = params.goal_weight;
    for ax in 0..3 {
        b[(r, ax)] = params.goal_weight * goal[ax];
    }
    Ok(PriorSystem { a, b, n_obs })
}

/// Knot intervals in units of the mean observation period: stamp differences over
/// the observations, then the constant-speed travel time between the points of the
/// initial path. Uniform when the target has not moved.
pub fn knot_intervals(obs: &ObservationBuffer, goal: &Vec3, n_total: usize) -> Vec<f64> {
    let stamps: Vec<f64> = obs.iter().map(|o| o.t).collect();
    let span = stamps[stamps.len() - 1] - stamps[0];
    let period = span / (stamps.len() - 1) as f64;
    let v_avg = obs.average_speed();
    if !(v_avg > 0.0) || !(period > 0.0) {
        return vec![1.0; n_total - 1];
    }
    let init = initial_path(obs, goal, n_total);
    let mut h: Vec<f64> = stamps.windows(2).map(|w| (w[1] - w[0]) / period).collect();
    for n in stamps.len()..n_total {
        let dt = (init[n] - init[n - 1]).norm() / v_avg;
        h.push((dt / period).max(1e-2));
    }
    h
}

/// Obstacle cost of a single point and its gradient:
/// `-φ + ε/2` inside obstacles, `(φ − ε)² / 2ε` within `ε` of them, zero beyond.
pub fn obstacle_cost(esdf: &EsdfGrid, p: &Vec3, eps: f64) -> (f64, Vec3) {
    let (phi, grad) = esdf.phi_and_gradient(p);
    let (c, dc) = if phi < 0.0 {
        (-phi + 0.5 * eps, -1.0)
    } else if phi <= eps {
        let d = phi - eps;
        (0.5 * d * d / eps, d / eps)
    } else {
        (0.0, 0.0)
    };
    (c, grad * dc)
}

fn obstacle_total(esdf: &EsdfGrid, xi: &DMatrix<f64>, eps: f64) -> (f64, DMatrix<f64>) {
    let mut total = 0.0;
    let mut grad = DMatrix::zeros(xi.nrows(), 3);
    for n in 0..xi.nrows() {
        let p = Vec3::new(xi[(n, 0)], xi[(n, 1)], xi[(n, 2)]);
        let (c, g) = obstacle_cost(esdf, &p, eps);
        total += c;
        for ax in 0..3 {
            grad[(n, ax)] = g[ax];
        }
    }
    (total, grad)
}

/// Sum of the obstacle cost over path points, with the stacked gradient.
pub fn path_obstacle_cost(esdf: &EsdfGrid, points: &[Vec3], eps: f64) -> (f64, Vec<Vec3>) {
    let xi = to_matrix(points);
    let (c, g) = obstacle_total(esdf, &xi, eps);
    (c, from_matrix(&g))
}

fn to_matrix(points: &[Vec3]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), 3, |r, c| points[r][c])
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec3> {
    (0..m.nrows())
        .map(|r| Vec3::new(m[(r, 0)], m[(r, 1)], m[(r, 2)]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPath {
    pub points: Vec<Vec3>,
    pub iterations: usize,
    /// Objective after initialization followed by each accepted iterate.
    pub objective_history: Vec<f64>,
}

impl PredictedPath {
    pub fn initial_objective(&self) -> f64 {
        self.objective_history[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().unwrap()
    }
}

/// Observed points start at their observations, future points on the straight line
/// from the latest observation to the goal.
pub fn initial_path(obs: &ObservationBuffer, goal: &Vec3, n_total: usize) -> Vec<Vec3> {
    let mut pts: Vec<Vec3> = obs.iter().map(|o| o.position).collect();
    let last = *pts.last().expect("non-empty observations");
    let future = n_total - pts.len();
    for j in 1..=future {
        pts.push(last + (goal - last) * (j as f64 / future as f64));
    }
    pts
}

pub fn prediction_objective(prior: &PriorSystem, esdf: &EsdfGrid, points: &[Vec3], params: &PredictionParams) -> f64 {
    let xi = to_matrix(points);
    params.rho * prior.cost(&xi) + obstacle_total(esdf, &xi, params.eps_chomp).0
}

/// Minimizes `½ρ‖Aξ − b‖² + Σ f_obs(z_n)` by covariant descent
/// `Δξ = −α (AᵀA)⁻¹ (ρ(AᵀAξ − Aᵀb) + ∇f_obs)`, halving the step whenever it would
/// raise the objective.
pub fn predict_path(
    obs: &ObservationBuffer,
    goal: &Vec3,
    esdf: &EsdfGrid,
    params: &PredictionParams,
) -> Result<PredictedPath, PredictionError> {
    let prior = assemble_prior(obs, goal, params)?;
    let normal = prior.a.transpose() * &prior.a;
    let atb = prior.a.transpose() * &prior.b;
    let chol: Cholesky<f64, Dyn> = Cholesky::new(normal.clone()).ok_or(PredictionError::SingularPrior)?;

    let objective = |xi: &DMatrix<f64>| -> (f64, DMatrix<f64>) {
        let (f, g) = obstacle_total(esdf, xi, params.eps_chomp);
        (params.rho * prior.cost(xi) + f, g)
    };

    let mut xi = to_matrix(&initial_path(obs, goal, params.n_total));
    let (mut value, mut obstacle_grad) = objective(&xi);
    if !value.is_finite() {
        return Err(PredictionError::NonFinite);
    }
    let mut history = vec![value];
    let mut iterations = 0;
    while iterations < params.max_iters {
        iterations += 1;
        let grad = (&normal * &xi - &atb) * params.rho + &obstacle_grad;
        let direction = -chol.solve(&grad);
        let mut step = params.alpha;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = &xi + &direction * step;
            let (v, g) = objective(&candidate);
            if !v.is_finite() {
                return Err(PredictionError::NonFinite);
            }
            if v <= value {
                accepted = Some((candidate, v, g));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, v, g)) = accepted else {
            break;
        };
        let decrease = value - v;
        xi = candidate;
        value = v;
        obstacle_grad = g;
        history.push(value);
        if decrease < params.converge_tol {
            break;
        }
    }
    Ok(PredictedPath {
        points: from_matrix(&xi),
        iterations,
        objective_history: history,
    })
}

/// Knot times: observation stamps for the observed points, then constant-speed
/// progression at the observed average speed. Returns the times and that speed.
pub fn allocate_times(points: &[Vec3], obs: &ObservationBuffer) -> Result<(Vec<f64>, f64), PredictionError> {
    let v_avg = obs.average_speed();
    if !(v_avg > 0.0) || !v_avg.is_finite() {
        return Err(PredictionError::StationaryTarget);
    }
    let mut times: Vec<f64> = obs.iter().map(|o| o.t).collect();
    for n in times.len()..points.len() {
        let prev = times[n - 1];
        times.push(prev + (points[n] - points[n - 1]).norm() / v_avg);
    }
    Ok((times, v_avg))
}

/// Time-stamped predicted path, sampled by linear interpolation between knots and
/// held at the last point afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPrediction {
    pub points: Vec<Vec3>,
    pub knot_times: Vec<f64>,
    pub goal: Vec3,
    pub v_avg: f64,
    /// The target did not move over the observation window; the path holds the
    /// latest observed position.
    pub stationary: bool,
}

impl TargetPrediction {
    pub fn stationary(obs: &ObservationBuffer, goal: Vec3) -> Self {
        let last = obs.latest().map(|o| o.position).unwrap_or(goal);
        Self {
            points: vec![last; obs.len().max(1)],
            knot_times: if obs.is_empty() {
                vec![0.0]
            } else {
                obs.iter().map(|o| o.t).collect()
            },
            goal,
            v_avg: 0.0,
            stationary: true,
        }
    }

    pub fn start_time(&self) -> f64 {
        self.knot_times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.knot_times.last().unwrap()
    }

    pub fn sample(&self, tau: f64) -> Result<Vec3, PredictionError> {
        let t0 = self.start_time();
        if tau < t0 {
            return Err(PredictionError::BeforeStart { tau, t0 });
        }
        let i = self.knot_times.partition_point(|&t| t <= tau);
        if i >= self.knot_times.len() {
            return Ok(*self.points.last().unwrap());
        }
        let (ta, tb) = (self.knot_times[i - 1], self.knot_times[i]);
        let (za, zb) = (self.points[i - 1], self.points[i]);
        Ok((za * (tb - tau) + zb * (tau - ta)) / (tb - ta))
    }
}

/// Full forecast: path optimization, time allocation, and the stationary fallback.
pub fn predict_target(
    obs: &ObservationBuffer,
    goal: &Vec3,
    esdf: &EsdfGrid,
    params: &PredictionParams,
) -> Result<TargetPrediction, PredictionError> {
    params.validate()?;
    if obs.len() != params.n_obs {
        return Err(PredictionError::NotEnoughObservations {
            have: obs.len(),
            need: params.n_obs,
        });
    }
    if !(obs.average_speed() > 0.0) {
        return Ok(TargetPrediction::stationary(obs, *goal));
    }
    let path = predict_path(obs, goal, esdf, params)?;
    let (knot_times, v_avg) = allocate_times(&path.points, obs)?;
    Ok(TargetPrediction {
        points: path.points,
        knot_times,
        goal: *goal,
        v_avg,
        stationary: false,
    })
}
