use serde::{Deserialize, Serialize};

use crate::scenario::ParamError;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptLeg {
    pub to: Vec3,
    /// Meters per second along the leg.
    pub speed: f64,
    /// Abrupt maneuver meant to break line of sight.
    #[serde(default)]
    pub hide: bool,
}

/// Piecewise-linear target motion: start point, then legs driven at constant speed.
/// The target rests at the last waypoint once the script is exhausted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetScript {
    pub start: Vec3,
    #[serde(default)]
    pub legs: Vec<ScriptLeg>,
}

impl TargetScript {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (i, leg) in self.legs.iter().enumerate() {
            if !(leg.speed > 0.0) || !leg.speed.is_finite() {
                return Err(ParamError::new(
                    &[&format!("target.legs[{i}].speed")],
                    format!("must be positive, got {}", leg.speed),
                ));
            }
        }
        Ok(())
    }

    pub fn waypoints(&self) -> impl Iterator<Item = Vec3> + '_ {
        std::iter::once(self.start).chain(self.legs.iter().map(|l| l.to))
    }

    /// Start time of every leg followed by the script end time.
    pub fn leg_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        let mut from = self.start;
        for leg in &self.legs {
            let t = times.last().unwrap() + (leg.to - from).norm() / leg.speed;
            times.push(t);
            from = leg.to;
        }
        times
    }

    pub fn duration(&self) -> f64 {
        *self.leg_times().last().unwrap()
    }

    /// Index of the leg being driven at `t`, `None` before the start or after the end.
    pub fn leg_at(&self, t: f64) -> Option<usize> {
        let times = self.leg_times();
        if t < 0.0 || t >= *times.last().unwrap() {
            return None;
        }
        Some(times.partition_point(|&s| s <= t) - 1)
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let times = self.leg_times();
        let Some(i) = self.leg_at(t) else {
            return if t < 0.0 {
                self.start
            } else {
                self.waypoints().last().unwrap()
            };
        };
        let from = if i == 0 { self.start } else { self.legs[i - 1].to };
        let span = times[i + 1] - times[i];
        let s = if span > 0.0 { (t - times[i]) / span } else { 1.0 };
        from + (self.legs[i].to - from) * s
    }
}
