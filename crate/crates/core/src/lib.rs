//! Receding-horizon planning for a camera drone chasing a moving target through a
//! known obstacle map.
//!
//! The pipeline runs in three stages on a shared signed distance field:
//!
//! 1. [`prediction`] forecasts the target path from recent observations, pulling it
//!    away from obstacles, and stamps it with times.
//! 2. [`preplan`] picks one viewpoint per future time step on a layered graph,
//!    trading travel, tracking distance and line-of-sight robustness ([`visibility`]),
//!    then wraps consecutive viewpoints in box corridors.
//! 3. [`smooth`] fits a jerk-minimizing piecewise polynomial inside the corridors.
//!
//! [`mission`] closes the loop in simulation and [`scenario`] loads run configurations.

pub mod mission;
pub mod prediction;
pub mod preplan;
pub mod scenario;
pub mod smooth;
pub mod visibility;
pub mod world;

pub type Vec3 = nalgebra::Vector3<f64>;
