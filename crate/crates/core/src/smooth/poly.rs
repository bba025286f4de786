use nalgebra::DMatrix;

use crate::Vec3;

use super::SmoothError;

/// `i! / (i - r)!`, the factor produced by differentiating `t^i` `r` times.
pub fn falling_factorial(i: usize, r: usize) -> f64 {
    if r > i {
        return 0.0;
    }
    ((i - r + 1)..=i).fold(1.0, |acc, k| acc * k as f64)
}

/// Row `[d^r/dt^r t^i]_{i=0..=order}` evaluated at local time `t`.
pub fn basis_row(order: usize, t: f64, r: usize) -> Vec<f64> {
    (0..=order)
        .map(|i| {
            if i < r {
                0.0
            } else {
                falling_factorial(i, r) * t.powi((i - r) as i32)
            }
        })
        .collect()
}

/// Gram matrix of the third derivative over `[0, duration]`:
/// `∫ (d³/dt³ t^i)(d³/dt³ t^j) dt`.
pub fn jerk_gram(order: usize, duration: f64) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(order + 1, order + 1);
    for i in 3..=order {
        for j in 3..=order {
            let p = (i + j - 5) as i32;
            q[(i, j)] = falling_factorial(i, 3) * falling_factorial(j, 3) * duration.powi(p) / p as f64;
        }
    }
    q
}

/// Piecewise polynomial chaser trajectory. Segment `k` covers `[knots[k], knots[k+1]]`
/// and is expressed in local time `τ - knots[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaseTrajectory {
    pub knots: Vec<f64>,
    /// `segments[k][i]` is the 3-vector coefficient of `(τ - knots[k])^i`.
    pub segments: Vec<Vec<Vec3>>,
    /// `(time, yaw)` samples, linearly interpolated.
    pub yaw: Vec<(f64, f64)>,
}

impl ChaseTrajectory {
    /// Trajectory resting at `p` over `[t0, t1]`.
    pub fn hold(p: Vec3, t0: f64, t1: f64, yaw: f64) -> Self {
        Self {
            knots: vec![t0, t1],
            segments: vec![vec![p]],
            yaw: vec![(t0, yaw)],
        }
    }

    pub fn start_time(&self) -> f64 {
        self.knots[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn covers(&self, tau: f64) -> bool {
        tau >= self.start_time() && tau <= self.end_time()
    }

    fn segment_at(&self, tau: f64) -> usize {
        let n = self.segments.len();
        // first segment whose right knot is at or past tau: knots go to the left segment
        let k = self.knots[1..].partition_point(|&t| t < tau);
        k.min(n - 1)
    }

    fn eval_segment(&self, k: usize, s: f64, order: usize) -> Vec3 {
        let coeffs = &self.segments[k];
        let mut out = Vec3::zeros();
        for (i, c) in coeffs.iter().enumerate().skip(order) {
            out += c * (falling_factorial(i, order) * s.powi((i - order) as i32));
        }
        out
    }

    /// Derivative of the given order at `tau`.
    pub fn evaluate(&self, tau: f64, order: usize) -> Result<Vec3, SmoothError> {
        if !self.covers(tau) {
            return Err(SmoothError::OutOfRange {
                tau,
                start: self.start_time(),
                end: self.end_time(),
            });
        }
        let k = self.segment_at(tau);
        Ok(self.eval_segment(k, tau - self.knots[k], order))
    }

    /// Position, velocity, acceleration with `tau` clamped into the domain. Past the
    /// end the chaser is taken to rest at the final position.
    pub fn state_at(&self, tau: f64) -> (Vec3, Vec3, Vec3) {
        let end = self.end_time();
        if tau > end {
            let k = self.segments.len() - 1;
            let p = self.eval_segment(k, end - self.knots[k], 0);
            return (p, Vec3::zeros(), Vec3::zeros());
        }
        let t = tau.max(self.start_time());
        let k = self.segment_at(t);
        let s = t - self.knots[k];
        (
            self.eval_segment(k, s, 0),
            self.eval_segment(k, s, 1),
            self.eval_segment(k, s, 2),
        )
    }

    pub fn yaw_at(&self, tau: f64) -> f64 {
        let y = &self.yaw;
        if y.is_empty() {
            return 0.0;
        }
        let i = y.partition_point(|&(t, _)| t <= tau);
        if i == 0 {
            return y[0].1;
        }
        if i == y.len() {
            return y[i - 1].1;
        }
        let ((ta, ya), (tb, yb)) = (y[i - 1], y[i]);
        ya + (yb - ya) * (tau - ta) / (tb - ta)
    }

    /// Largest mismatch of orders 0..=2 between the two sides of every interior knot.
    pub fn continuity_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for k in 0..self.segments.len().saturating_sub(1) {
            let dur = self.knots[k + 1] - self.knots[k];
            for r in 0..3 {
                let left = self.eval_segment(k, dur, r);
                let right = self.eval_segment(k + 1, 0.0, r);
                gap = gap.max((left - right).amax());
            }
        }
        gap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_gram_on_unit_interval() {
        let q = jerk_gram(3, 1.0);
        assert_eq!(q[(3, 3)], 36.0);
        assert_eq!(q.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn gram_matches_quadrature() {
        let (order, dur) = (6, 1.3);
        let q = jerk_gram(order, dur);
        let n = 20_000;
        for i in 3..=order {
            for j in 3..=order {
                let mut sum = 0.0;
                for s in 0..n {
                    let t = (s as f64 + 0.5) / n as f64 * dur;
                    sum += basis_row(order, t, 3)[i] * basis_row(order, t, 3)[j];
                }
                let num = sum * dur / n as f64;
                assert!((num - q[(i, j)]).abs() <= 1e-6 * q[(i, j)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn knots_use_left_segment() {
        let t = ChaseTrajectory {
            knots: vec![0.0, 1.0, 2.0],
            segments: vec![vec![Vec3::zeros(), Vec3::x()], vec![Vec3::repeat(5.0)]],
            yaw: vec![],
        };
        assert_eq!(t.evaluate(0.0, 0).unwrap(), Vec3::zeros());
        assert_eq!(t.evaluate(1.0, 0).unwrap(), Vec3::x());
        assert_eq!(t.evaluate(1.5, 0).unwrap(), Vec3::repeat(5.0));
        assert!(t.evaluate(2.5, 0).is_err());
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let t = ChaseTrajectory::hold(Vec3::new(1.0, 2.0, 3.0), 0.0, 4.0, 0.0);
        for r in 1..=3 {
            assert_eq!(t.evaluate(2.0, r).unwrap(), Vec3::zeros());
        }
        assert_eq!(t.evaluate(0.0, 0).unwrap(), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = ChaseTrajectory {
            knots: vec![1.0, 2.5],
            segments: vec![(0..7)
                .map(|i| Vec3::new(0.3 * i as f64, -0.2 + 0.1 * i as f64, (i as f64).sin()))
                .collect()],
            yaw: vec![],
        };
        for k in 1..10 {
            let tau = 1.0 + 0.15 * k as f64;
            for r in 0..3 {
                let h = 1e-6;
                let fd = (t.evaluate(tau + h, r).unwrap() - t.evaluate(tau - h, r).unwrap()) / (2.0 * h);
                let an = t.evaluate(tau, r + 1).unwrap();
                assert!((fd - an).amax() <= 1e-5 * an.amax().max(1.0));
            }
        }
    }
}
