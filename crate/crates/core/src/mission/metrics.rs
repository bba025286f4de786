use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Why a replan was attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanReason {
    NoPlan,
    AccumErr,
    Horizon,
}

impl ReplanReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoPlan => "no_plan",
            Self::AccumErr => "accum_err",
            Self::Horizon => "horizon",
        }
    }
}

/// State and scores after one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub target: Vec3,
    pub chaser: Vec3,
    pub chaser_vel: Vec3,
    pub yaw: f64,
    pub phi_target: f64,
    pub phi_chaser: f64,
    pub psi: f64,
    pub visible: bool,
    /// Chaser displacement during this tick.
    pub step: f64,
    /// Accumulated prediction error before any reset this tick.
    pub accum_err: f64,
    pub via: usize,
    pub replan: Option<ReplanReason>,
    /// A replan was attempted this tick and failed.
    pub infeasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub ticks: usize,
    pub avg_psi: f64,
    pub occlusion_duration: f64,
    pub flight_distance: f64,
    pub min_phi_chaser: f64,
}

/// Aggregates over per-tick records; occlusion time counts `tick_dt` per hidden tick.
pub fn compute_metrics(records: &[TickRecord], tick_dt: f64) -> Aggregates {
    let n = records.len();
    let avg_psi = if n == 0 {
        0.0
    } else {
        records.iter().map(|r| r.psi).sum::<f64>() / n as f64
    };
    Aggregates {
        ticks: n,
        avg_psi,
        occlusion_duration: tick_dt * records.iter().filter(|r| !r.visible).count() as f64,
        flight_distance: records.iter().map(|r| r.step).sum(),
        min_phi_chaser: records.iter().map(|r| r.phi_chaser).fold(f64::INFINITY, f64::min),
    }
}

pub const METRICS_HEADER: &str = "t,target_x,target_y,target_z,chaser_x,chaser_y,chaser_z,yaw,\
phi_target,phi_chaser,psi,visible,step,accum_err,via,replan,infeasible";

pub const TRAJECTORY_HEADER: &str = "t,x,y,z,vx,vy,vz,yaw";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub tick_dt: f64,
    pub records: Vec<TickRecord>,
}

impl MetricsLog {
    pub fn new(tick_dt: f64) -> Self {
        Self {
            tick_dt,
            records: Vec::new(),
        }
    }

    pub fn aggregates(&self) -> Aggregates {
        compute_metrics(&self.records, self.tick_dt)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{METRICS_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.target.x,
                r.target.y,
                r.target.z,
                r.chaser.x,
                r.chaser.y,
                r.chaser.z,
                r.yaw,
                r.phi_target,
                r.phi_chaser,
                r.psi,
                u8::from(r.visible),
                r.step,
                r.accum_err,
                r.via,
                r.replan.map_or("", ReplanReason::as_str),
                u8::from(r.infeasible),
            )?;
        }
        Ok(())
    }

    /// Executed chaser trajectory, one row per tick.
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for r in &self.records {
            let (p, v) = (r.chaser, r.chaser_vel);
            writeln!(out, "{},{},{},{},{},{},{},{}", r.t, p.x, p.y, p.z, v.x, v.y, v.z, r.yaw)?;
        }
        Ok(())
    }
}

impl fmt::Display for Aggregates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "avg psi {:.4}, occlusion {:.2} s, flight {:.2} m, min phi {:.3} m over {} ticks",
            self.avg_psi, self.occlusion_duration, self.flight_distance, self.min_phi_chaser, self.ticks
        )
    }
}
