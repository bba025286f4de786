use std::path::PathBuf;
use std::sync::Arc;

use chase_core::mission::{
    compute_metrics, run_mission, Mission, MissionError, MissionLog, ReplanReason, TargetControl,
};
use chase_core::scenario::{parse_config, Scenario, ScenarioConfig};
use chase_core::world::{compute_esdf, EsdfGrid, VoxelGrid};
use chase_core::Vec3;

fn scenario(name: &str) -> (ScenarioConfig, Arc<EsdfGrid>) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"));
    let s = Scenario::load(&path).unwrap();
    let esdf = s.load_world().unwrap();
    (s.config, Arc::new(esdf))
}

fn csv(log: &MissionLog) -> String {
    let mut buf = Vec::new();
    log.metrics.write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn trivial_run_is_clean() {
    let (config, esdf) = scenario("trivial");
    let log = run_mission(esdf, config.clone()).unwrap();
    let agg = log.metrics.aggregates();
    assert!(log.finished);
    assert_eq!(log.failed_replans(), 0);
    assert_eq!(agg.occlusion_duration, 0.0);
    assert!(agg.min_phi_chaser >= config.preplan.r_c);
    // once the observation window holds only straight-line motion the prediction is exact
    let late_err = log
        .metrics
        .records
        .iter()
        .filter(|r| r.t > config.mission.horizon + 1e-9)
        .filter(|r| r.replan == Some(ReplanReason::AccumErr))
        .count();
    assert_eq!(late_err, 0);
}

#[test]
fn runs_are_deterministic() {
    let (config, esdf) = scenario("city");
    let a = run_mission(esdf.clone(), config.clone()).unwrap();
    let b = run_mission(esdf, config).unwrap();
    assert_eq!(csv(&a), csv(&b));
    assert_eq!(a.events, b.events);
}

#[test]
fn per_tick_invariants_on_city() {
    let (config, esdf) = scenario("city");
    let mut m = Mission::new(esdf, config.clone()).unwrap();
    let mut last_via = 0;
    while !m.finished() && m.state().t < config.mission.time_limit - 1e-9 {
        let r = m.tick(TargetControl::Script).clone();
        assert!(r.via >= last_via, "via index went back at t={}", r.t);
        last_via = r.via;
        // a replan fires exactly when the accumulated error crosses its tolerance
        let over = r.accum_err > config.mission.accum_err_tol;
        match r.replan {
            Some(ReplanReason::AccumErr) => assert!(over, "t={}", r.t),
            None => assert!(!over || m.finished(), "missed trigger at t={}", r.t),
            _ => {}
        }
        if r.replan.is_some() && !r.infeasible {
            let s = m.state();
            let (p, v, _) = s.trajectory.as_ref().unwrap().state_at(r.t);
            assert!((p - r.chaser).norm() <= 1e-6, "position jump at t={}", r.t);
            assert!((v - r.chaser_vel).norm() <= 1e-6, "velocity jump at t={}", r.t);
            assert_eq!(s.accum_err, 0.0);
        }
        assert!(
            r.phi_chaser >= config.preplan.r_c - 0.05,
            "t={} phi={}",
            r.t,
            r.phi_chaser
        );
    }
    assert!(m.finished());
}

#[test]
fn aggregates_match_csv() {
    let (config, esdf) = scenario("city");
    let log = run_mission(esdf, config.clone()).unwrap();
    let text = csv(&log);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let (psi, vis, step) = (col("psi"), col("visible"), col("step"));
    let (mut sum_psi, mut hidden, mut flight, mut n) = (0.0, 0usize, 0.0, 0usize);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        sum_psi += f[psi].parse::<f64>().unwrap();
        hidden += usize::from(f[vis] == "0");
        flight += f[step].parse::<f64>().unwrap();
        n += 1;
    }
    let agg = log.metrics.aggregates();
    assert_eq!(agg, compute_metrics(&log.metrics.records, config.mission.tick_dt));
    assert_eq!(agg.ticks, n);
    assert!((agg.avg_psi - sum_psi / n as f64).abs() < 1e-9);
    assert!((agg.occlusion_duration - hidden as f64 * config.mission.tick_dt).abs() < 1e-9);
    assert!((agg.flight_distance - flight).abs() < 1e-9);
}

#[test]
fn stationary_target_holds_chaser() {
    let (config, esdf) = scenario("trivial");
    let mut m = Mission::new(esdf, config).unwrap();
    let cmd = TargetControl::Velocity { vx: 0.0, vy: 0.0 };
    for _ in 0..100 {
        m.tick(cmd);
    }
    let anchor = m.state().chaser_pos;
    for _ in 0..100 {
        let r = m.tick(cmd);
        assert!((r.chaser - anchor).norm() <= 1e-3, "drift at t={}", r.t);
        assert!(r.visible);
    }
}

#[test]
fn operator_commands_move_the_target() {
    let (config, esdf) = scenario("trivial");
    let mut m = Mission::new(esdf, config).unwrap();
    let start = m.state().target_pos;
    for _ in 0..20 {
        m.tick(TargetControl::Velocity { vx: 0.5, vy: 0.0 });
    }
    let moved = m.state().target_pos - start;
    assert!((moved - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-9);
}

fn walled() -> Arc<EsdfGrid> {
    let mut g = VoxelGrid::new(Vec3::zeros(), 0.2, [60, 40, 20]).unwrap();
    g.fill_box(Vec3::new(5.8, 0.0, 0.0), Vec3::new(6.2, 8.0, 4.0));
    Arc::new(compute_esdf(&g, 10.0).unwrap())
}

fn config(target: [f64; 3], to: [f64; 3], chaser: [f64; 3]) -> ScenarioConfig {
    let v = |p: [f64; 3]| format!("[{}, {}, {}]", p[0], p[1], p[2]);
    parse_config(&format!(
        r#"{{"map": "unused", "via_points": [{to}],
            "target": {{"start": {s}, "legs": [{{"to": {to}, "speed": 1.0}}]}},
            "chaser": {{"position": {c}}}}}"#,
        s = v(target),
        to = v(to),
        c = v(chaser)
    ))
    .unwrap()
}

#[test]
fn startup_is_validated() {
    let esdf = walled();
    let ok = config([2.0, 4.0, 1.0], [4.0, 4.0, 1.0], [1.0, 4.0, 2.0]);
    assert!(Mission::new(esdf.clone(), ok).is_ok());

    let hidden = config([8.0, 4.0, 1.0], [10.0, 4.0, 1.0], [2.0, 4.0, 2.0]);
    assert_eq!(
        Mission::new(esdf.clone(), hidden).err(),
        Some(MissionError::TargetOccluded)
    );

    let crash = config([2.0, 4.0, 1.0], [4.0, 4.0, 1.0], [6.1, 4.0, 2.0]);
    assert!(matches!(
        Mission::new(esdf.clone(), crash),
        Err(MissionError::ChaserInCollision { .. })
    ));

    let through = config([2.0, 4.0, 1.0], [10.0, 4.0, 1.0], [1.0, 4.0, 2.0]);
    assert_eq!(
        Mission::new(esdf, through).err(),
        Some(MissionError::LegBlocked { leg: 1 })
    );
}
