//! Scenario configuration and run artifacts.
//!
//! A scenario is a JSON document. Only `map`, `via_points`, `target` and `chaser` are
//! required; every parameter block falls back to its defaults field by field.
//!
//! ```json
//! {
//!   "name": "corner",
//!   "map": "corner.vxmap",
//!   "via_points": [[8.0, 2.0, 1.0]],
//!   "target": { "start": [2.0, 2.0, 1.0], "legs": [{ "to": [8.0, 2.0, 1.0], "speed": 0.5 }] },
//!   "chaser": { "position": [0.0, 2.0, 2.5] },
//!   "preplan": { "w_v": 5.0 }
//! }
//! ```
//!
//! The map path is resolved relative to the directory holding the config file.

use std::fmt;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mission::{MissionEvent, MissionLog, MissionParams, TargetScript};
use crate::prediction::PredictionParams;
use crate::preplan::PreplanParams;
use crate::smooth::SmoothParams;
use crate::world::{compute_esdf, parse_map, EsdfGrid, WorldError, DEFAULT_ESDF_CAP};
use crate::Vec3;

/// A configuration value failed validation. `fields` names every parameter involved.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub fields: Vec<String>,
    pub message: String,
}

impl ParamError {
    pub fn new(fields: &[&str], message: impl Into<String>) -> Self {
        Self {
            fields: fields.iter().map(|s| s.to_string()).collect(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {}: {}", self.fields.join(", "), self.message)
    }
}

impl std::error::Error for ParamError {}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Invalid(#[from] ParamError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("map {path}: {source}")]
    Map { path: PathBuf, source: WorldError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaserStart {
    pub position: Vec3,
    #[serde(default)]
    pub yaw: f64,
}

fn default_cap() -> f64 {
    DEFAULT_ESDF_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub map: PathBuf,
    /// Distance at which the signed distance field saturates (meters).
    #[serde(default = "default_cap")]
    pub esdf_cap: f64,
    /// Via-points `g_1 .. g_M` the target is known to pass, in order.
    pub via_points: Vec<Vec3>,
    pub target: TargetScript,
    pub chaser: ChaserStart,
    #[serde(default)]
    pub prediction: PredictionParams,
    #[serde(default)]
    pub preplan: PreplanParams,
    #[serde(default)]
    pub smooth: SmoothParams,
    #[serde(default)]
    pub mission: MissionParams,
    /// Enables a random sub-stride shift of the candidate lattice at every replan.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.prediction.validate()?;
        self.preplan.validate()?;
        self.smooth.validate()?;
        self.mission.validate()?;
        self.target.validate()?;
        if self.via_points.is_empty() {
            return Err(ParamError::new(&["via_points"], "at least one via-point is required"));
        }
        if !(self.esdf_cap > 0.0) {
            return Err(ParamError::new(&["esdf_cap"], "must be positive"));
        }
        if self.smooth.side_shrink >= self.preplan.r_c {
            return Err(ParamError::new(
                &["smooth.side_shrink", "preplan.r_c"],
                "the side tightening must be smaller than the corridor half-width",
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a config document. Schema errors carry the JSON path of the
/// offending field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            config: parse_config(&text)?,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn map_path(&self) -> PathBuf {
        self.base_dir.join(&self.config.map)
    }

    pub fn load_world(&self) -> Result<EsdfGrid, ConfigError> {
        let path = self.map_path();
        let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        let map_err = |source| ConfigError::Map {
            path: path.clone(),
            source,
        };
        let grid = parse_map(&text).map_err(map_err)?;
        compute_esdf(&grid, self.config.esdf_cap).map_err(map_err)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    aggregates: crate::mission::Aggregates,
    finished: bool,
    replans: usize,
    failed_replans: usize,
    events: &'a [MissionEvent],
    config: &'a ScenarioConfig,
}

/// Writes `metrics.csv`, `summary.json`, `trajectory.csv` and `events.log` into `dir`.
pub fn write_artifacts(dir: &Path, config: &ScenarioConfig, log: &MissionLog) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let create = |name: &str| fs::File::create(dir.join(name)).map(io::BufWriter::new);
    let mut metrics = create("metrics.csv")?;
    log.metrics.write_csv(&mut metrics)?;
    metrics.flush()?;
    let mut traj = create("trajectory.csv")?;
    log.metrics.write_trajectory_csv(&mut traj)?;
    traj.flush()?;
    let mut events = create("events.log")?;
    for e in &log.events {
        writeln!(events, "{e}")?;
    }
    events.flush()?;
    let summary = Summary {
        aggregates: log.metrics.aggregates(),
        finished: log.finished,
        replans: log.replans(),
        failed_replans: log.failed_replans(),
        events: &log.events,
        config,
    };
    let mut out = create("summary.json")?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "map": "m.vxmap",
        "via_points": [[1.0, 2.0, 1.0]],
        "target": {"start": [0.0, 0.0, 1.0], "legs": [{"to": [1.0, 2.0, 1.0], "speed": 0.5}]},
        "chaser": {"position": [-2.0, 0.0, 2.5]}
    }"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.prediction, PredictionParams::default());
        assert_eq!(c.preplan, PreplanParams::default());
        assert_eq!(c.smooth, SmoothParams::default());
        assert_eq!(c.mission, MissionParams::default());
        assert_eq!(c.mission.horizon, 4.0);
        assert_eq!(c.preplan.n_layers, 4);
        assert_eq!(c.smooth.order, 6);
        assert_eq!(c.seed, None);
        assert_eq!(c.via_points[0], Vec3::new(1.0, 2.0, 1.0));
    }

    #[test]
    fn round_trip() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.seed = Some(7);
        c.preplan.w_v = 1.0;
        c.target.legs[0].hide = true;
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad = MINIMAL.replace(r#""speed": 0.5"#, r#""speed": "fast""#);
        match parse_config(&bad) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "target.legs[0].speed"),
            other => panic!("{other:?}"),
        }
        let unknown = MINIMAL.replace(r#""map""#, r#""preplan": {"w_x": 1.0}, "map""#);
        match parse_config(&unknown) {
            Err(ConfigError::Schema { path, message }) => {
                assert_eq!(path, "preplan.w_x");
                assert!(message.contains("unknown field"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corridor_wider_than_margin_is_rejected() {
        let bad = MINIMAL.replace(r#""map""#, r#""preplan": {"r_c": 0.5}, "map""#);
        match parse_config(&bad) {
            Err(ConfigError::Invalid(e)) => assert_eq!(e.fields, vec!["preplan.r_c", "preplan.r_safe"]),
            other => panic!("{other:?}"),
        }
    }
}
