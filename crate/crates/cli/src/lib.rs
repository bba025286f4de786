//! Batch commands and the interactive server behind the `chase` binary.

pub mod server;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use chase_core::mission::{run_mission, Aggregates, MissionLog};
use chase_core::scenario::{write_artifacts, Scenario, ScenarioConfig};
use chase_core::visibility::{visibility_field, write_field_csv, Aabb};
use chase_core::world::EsdfGrid;
use chase_core::Vec3;

pub type CliResult<T> = Result<T, String>;

pub fn load(config: &Path) -> CliResult<(Scenario, Arc<EsdfGrid>)> {
    let scenario = Scenario::load(config).map_err(|e| e.to_string())?;
    let esdf = scenario.load_world().map_err(|e| e.to_string())?;
    Ok((scenario, Arc::new(esdf)))
}

pub fn run_config(esdf: &Arc<EsdfGrid>, config: &ScenarioConfig, out: Option<&Path>) -> CliResult<MissionLog> {
    let log = run_mission(esdf.clone(), config.clone()).map_err(|e| e.to_string())?;
    if let Some(dir) = out {
        write_artifacts(dir, config, &log).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    Ok(log)
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_summary(log: &MissionLog) -> String {
    format!(
        "{}; {} replans ({} failed), median replan {:.1} ms, {}",
        log.metrics.aggregates(),
        log.replans(),
        log.failed_replans(),
        median(&log.replan_ms),
        if log.finished { "finished" } else { "time limit reached" }
    )
}

/// One row per visibility weight with the three comparison metrics.
pub fn sweep_table(rows: &[(f64, Aggregates)]) -> String {
    let mut out = String::from("w_v    avg_psi   occlusion_s  flight_m\n");
    for (w, a) in rows {
        let _ = writeln!(
            out,
            "{:<6} {:<9.4} {:<12.2} {:.2}",
            w, a.avg_psi, a.occlusion_duration, a.flight_distance
        );
    }
    out
}

pub fn sweep(
    esdf: &Arc<EsdfGrid>,
    config: &ScenarioConfig,
    weights: &[f64],
    out: Option<&Path>,
) -> CliResult<Vec<(f64, Aggregates)>> {
    let mut rows = Vec::with_capacity(weights.len());
    for &w in weights {
        let mut c = config.clone();
        c.preplan.w_v = w;
        let dir = out.map(|d| d.join(format!("wv_{w}")));
        let log = run_config(esdf, &c, dir.as_deref())?;
        rows.push((w, log.metrics.aggregates()));
    }
    Ok(rows)
}

fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("invalid number `{s}`")))
        .collect()
}

pub fn parse_point(text: &str) -> CliResult<Vec3> {
    match parse_list(text)?.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got `{text}`")),
    }
}

/// Horizontal ψ slice at height `z` over the whole map, as CSV.
pub fn field_csv(esdf: &EsdfGrid, target: &Vec3, z: f64, stride: f64, out: &Path) -> CliResult<usize> {
    let grid = esdf.grid();
    let (lo, hi) = (grid.min_corner(), grid.max_corner());
    let eps = 1e-6;
    let region = Aabb::new(
        Vec3::new(lo.x + eps, lo.y + eps, z),
        Vec3::new(hi.x - eps, hi.y - eps, z),
    );
    let samples = visibility_field(esdf, target, &region, stride).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_field_csv(&samples, &mut buf).map_err(|e| e.to_string())?;
    fs::write(out, buf).map_err(|e| format!("{}: {e}", out.display()))?;
    Ok(samples.len())
}
