//! One PASS/FAIL line per acceptance criterion. Runs without the test harness so the
//! report is always printed; exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use chase_core::mission::{run_mission, EventKind, MissionLog, ScriptLeg, TargetScript};
use chase_core::prediction::{path_obstacle_cost, predict_path, predict_target, ObservationBuffer, PredictionParams};
use chase_core::preplan::{
    corridors_from_skeleton, solve_viewpoint_sequence, Edge, LayeredGraph, PreplanError, ViewpointLayer,
    ViewpointSkeleton,
};
use chase_core::scenario::{Scenario, ScenarioConfig};
use chase_core::smooth::{build_qp, solve_qp, var_index, InitState, QpProblem, SmoothParams};
use chase_core::world::{compute_esdf, EsdfGrid, VoxelGrid};
use chase_core::Vec3;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn load(name: &str) -> (ScenarioConfig, Arc<EsdfGrid>) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"));
    let s = Scenario::load(&path).unwrap();
    let esdf = s.load_world().unwrap();
    (s.config, Arc::new(esdf))
}

fn brute_force_esdf(grid: &VoxelGrid, cap: f64) -> Vec<f64> {
    let centers: Vec<Vec3> = (0..grid.len()).map(|i| grid.index_to_world(grid.unlinear(i))).collect();
    (0..grid.len())
        .map(|i| {
            let occ = grid.is_occupied_linear(i);
            let best = (0..grid.len())
                .filter(|&j| grid.is_occupied_linear(j) != occ)
                .map(|j| (centers[j] - centers[i]).norm())
                .fold(f64::INFINITY, f64::min);
            if occ {
                -best.min(cap)
            } else {
                best.min(cap)
            }
        })
        .collect()
}

fn esdf_oracle(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut elapsed) = (0.0f64, 0.0);
    for _ in 0..50 {
        let dims = [
            rng.random_range(1..=16),
            rng.random_range(1..=16),
            rng.random_range(1..=16),
        ];
        let res = rng.random_range(0.1..1.0);
        let mut g = VoxelGrid::new(Vec3::new(-1.0, 0.5, 2.0), res, dims).unwrap();
        let density = rng.random_range(0.0..0.4);
        for i in 0..g.len() {
            if rng.random_bool(density) {
                g.set_occupied(g.unlinear(i), true);
            }
        }
        let cap = 100.0;
        let start = Instant::now();
        let e = compute_esdf(&g, cap).unwrap();
        elapsed += start.elapsed().as_secs_f64();
        for (a, b) in e.phi_values().iter().zip(brute_force_esdf(&g, cap)) {
            worst = worst.max((a - b).abs());
        }
    }
    r.line(
        "ESDF oracle equivalence",
        worst <= 1e-9 && elapsed < 1.0,
        format!("50 grids up to 16^3, max |diff| {worst:.1e}, total {:.3} s", elapsed),
    );
}

fn prediction(r: &mut Report) {
    let mut g = VoxelGrid::new(Vec3::new(-20.0, -20.0, 0.0), 0.4, [100, 100, 15]).unwrap();
    let empty = compute_esdf(&g, 10.0).unwrap();
    let params = PredictionParams::default();
    let horizon = 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(0.3..2.0);
        let v = Vec3::new(heading.cos(), heading.sin(), 0.0) * speed;
        let p0 = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 1.0);
        let dt = horizon / params.n_obs as f64;
        let mut obs = ObservationBuffer::new(params.n_obs);
        for i in 0..params.n_obs {
            let t = i as f64 * dt;
            obs.push(t, p0 + v * t).unwrap();
        }
        let t_now = (params.n_obs - 1) as f64 * dt;
        // the via-point lies on the line, beyond the horizon
        let goal = p0 + v * (t_now + horizon * rng.random_range(1.2..3.0));
        let pred = predict_target(&obs, &goal, &empty, &params).unwrap();
        for s in 0..=40 {
            let tau = t_now + horizon * s as f64 / 40.0;
            let err = (pred.sample(tau).unwrap() - (p0 + v * tau)).norm();
            worst_ratio = worst_ratio.max(err / (speed * horizon));
        }
    }

    // descent must never raise the objective, also when obstacles push the path
    g.fill_box(Vec3::new(3.0, -1.0, 0.0), Vec3::new(3.6, 1.0, 3.0));
    g.fill_box(Vec3::new(-2.0, 2.0, 0.0), Vec3::new(2.0, 2.6, 3.0));
    let walls = compute_esdf(&g, 10.0).unwrap();
    let mut rises = 0;
    let mut runs = 0;
    for _ in 0..50 {
        let a = Vec3::new(rng.random_range(-4.0..0.0), rng.random_range(-2.0..2.0), 1.0);
        let v = Vec3::new(rng.random_range(0.3..1.5), rng.random_range(-0.3..0.3), 0.0);
        let mut obs = ObservationBuffer::new(params.n_obs);
        for i in 0..params.n_obs {
            obs.push(i as f64, a + v * i as f64).unwrap();
        }
        let goal = Vec3::new(8.0, rng.random_range(-3.0..3.0), 1.0);
        let path = predict_path(&obs, &goal, &walls, &params).unwrap();
        rises += path.objective_history.windows(2).filter(|w| w[1] > w[0]).count();
        runs += 1;
    }

    let mut checked = 0;
    let mut worst_fd = 0.0f64;
    while checked < 100 {
        let p = Vec3::new(
            rng.random_range(1.5..6.0),
            rng.random_range(-2.5..3.5),
            rng.random_range(0.3..3.5),
        );
        let (c, grad) = path_obstacle_cost(&walls, &[p], params.eps_chomp);
        if c == 0.0 {
            continue;
        }
        let h = 1e-6;
        for ax in 0..3 {
            let (mut hi, mut lo) = (p, p);
            hi[ax] += h;
            lo[ax] -= h;
            let fd = (path_obstacle_cost(&walls, &[hi], params.eps_chomp).0
                - path_obstacle_cost(&walls, &[lo], params.eps_chomp).0)
                / (2.0 * h);
            worst_fd = worst_fd.max((fd - grad[0][ax]).abs() / grad[0].norm().max(1e-3));
        }
        checked += 1;
    }
    r.line(
        "Prediction correctness",
        worst_ratio <= 0.05 && rises == 0 && worst_fd <= 1e-4,
        format!(
            "worst error {:.2}% of v*H over 20 targets; {rises} objective increases in {runs} descents; \
             gradient vs finite differences {worst_fd:.1e} relative on 100 points",
            100.0 * worst_ratio
        ),
    );
}

fn random_graph(rng: &mut ChaCha8Rng) -> LayeredGraph {
    let n_layers = rng.random_range(1..=5);
    let sizes: Vec<usize> = (0..n_layers).map(|_| rng.random_range(1..=10)).collect();
    let density = rng.random_range(0.3..1.0);
    let edges = (0..n_layers)
        .map(|l| {
            let from_n = if l == 0 { 1 } else { sizes[l - 1] };
            let mut out = Vec::new();
            for from in 0..from_n {
                for to in 0..sizes[l] {
                    if rng.random_bool(density) {
                        let weight = if rng.random_bool(0.3) {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random_range(0.0..10.0)
                        };
                        out.push(Edge { from, to, weight });
                    }
                }
            }
            out
        })
        .collect();
    LayeredGraph {
        start: Vec3::zeros(),
        start_time: 0.0,
        start_target: Vec3::zeros(),
        layers: sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| ViewpointLayer {
                k: k + 1,
                time: (k + 1) as f64,
                target: Vec3::zeros(),
                candidates: (0..n).map(|i| Vec3::new(i as f64, k as f64, 0.0)).collect(),
                scores: vec![1.0; n],
                relaxed: false,
            })
            .collect(),
        edges,
    }
}

fn enumerate(graph: &LayeredGraph) -> Result<f64, usize> {
    let mut partial = vec![(0usize, 0.0f64)];
    for (l, edges) in graph.edges.iter().enumerate() {
        let next: Vec<_> = partial
            .iter()
            .flat_map(|&(node, cost)| {
                edges
                    .iter()
                    .filter(move |e| e.from == node)
                    .map(move |e| (e.to, cost + e.weight))
            })
            .collect();
        if next.is_empty() {
            return Err(l + 1);
        }
        partial = next;
    }
    Ok(partial.iter().map(|p| p.1).fold(f64::INFINITY, f64::min))
}

fn preplanner(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut infeasible = 0;
    for _ in 0..100 {
        let g = random_graph(&mut rng);
        match (solve_viewpoint_sequence(&g), enumerate(&g)) {
            (Ok(s), Ok(best)) if s.total_cost == best => {}
            (Err(PreplanError::Unreachable { layer }), Err(l)) if layer == l => infeasible += 1,
            _ => mismatches += 1,
        }
    }
    r.line(
        "Preplanner optimality",
        mismatches == 0,
        format!("100 random layered graphs, {mismatches} mismatches ({infeasible} infeasible, agreed)"),
    );
}

fn min_jerk_quintic(p0: f64, v0: f64, a0: f64, target: f64, t: f64, lambda: f64) -> [f64; 6] {
    let (c0, c1, c2) = (p0, v0, a0 / 2.0);
    let m = Matrix3::new(
        6.0,
        24.0 * t,
        60.0 * t * t,
        0.0,
        24.0,
        120.0 * t,
        lambda * t.powi(3),
        lambda * t.powi(4),
        120.0 + lambda * t.powi(5),
    );
    let rhs = Vector3::new(0.0, 0.0, lambda * (target - c0 - c1 * t - c2 * t * t));
    let c = m.lu().solve(&rhs).unwrap();
    [c0, c1, c2, c[0], c[1], c[2]]
}

fn quintic_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rv = |s: f64| {
        Vec3::new(
            rng.random_range(-s..s),
            rng.random_range(-s..s),
            rng.random_range(-s..s),
        )
    };
    let mut worst = 0.0f64;
    for lambda in [0.5, 10.0, 1e4] {
        for i in 0..10 {
            let t = 0.5 + 0.15 * i as f64;
            let init = InitState {
                pos: rv(2.0),
                vel: rv(1.0),
                acc: rv(0.5),
            };
            let goal = init.pos + rv(2.0);
            let s = ViewpointSkeleton {
                targets: vec![init.pos, goal],
                choices: vec![0],
                points: vec![init.pos, goal],
                times: vec![0.0, t],
                total_cost: 0.0,
            };
            let c = corridors_from_skeleton(&s, 0.2);
            let params = SmoothParams {
                lambda,
                ..Default::default()
            };
            let qp = build_qp(&c, &s, &init, &params, 8).unwrap();
            let n = qp.n_vars();
            let free = QpProblem {
                a_in: DMatrix::zeros(0, n),
                b_in: DVector::zeros(0),
                ..qp
            };
            let sol = solve_qp(&free).unwrap();
            for d in 0..3 {
                let want = min_jerk_quintic(init.pos[d], init.vel[d], init.acc[d], goal[d], t, lambda);
                for k in 0..=params.order {
                    let w = if k < 6 { want[k] } else { 0.0 };
                    let got = sol.x[var_index(params.order, 0, d, k)];
                    worst = worst.max((got - w).abs() / w.abs().max(1.0));
                }
            }
        }
    }
    worst
}

struct Runs {
    names: Vec<&'static str>,
    configs: Vec<ScenarioConfig>,
    logs: Vec<MissionLog>,
}

fn qp_correctness(r: &mut Report, runs: &Runs) {
    let quintic = quintic_error();
    let (mut kkt, mut samples, mut plans) = (0.0f64, 0.0f64, 0);
    for log in &runs.logs {
        for e in &log.events {
            if let EventKind::Replan {
                kkt: k,
                sample_violation,
                ..
            } = e.kind
            {
                kkt = kkt.max(k);
                samples = samples.max(sample_violation);
                plans += 1;
            }
        }
    }
    r.line(
        "QP correctness",
        quintic <= 1e-5 && kkt <= 1e-6 && samples <= 1e-6,
        format!(
            "min-jerk quintic max rel. error {quintic:.1e} on 30 problems; over {plans} plans in the shipped \
             scenarios max KKT residual {kkt:.1e}, max sample violation {samples:.1e}"
        ),
    );
}

fn safety(r: &mut Report, runs: &Runs) {
    let mut ok = true;
    let mut parts = Vec::new();
    for ((name, config), log) in runs.names.iter().zip(&runs.configs).zip(&runs.logs) {
        let min_phi = log.metrics.aggregates().min_phi_chaser;
        ok &= min_phi >= config.preplan.r_c - 1e-9;
        parts.push(format!("{name} {min_phi:.3}"));
    }
    let city = runs.names.iter().position(|n| *n == "city").unwrap();
    let via = runs.configs[city].via_points.len();
    r.line(
        "Safety invariant",
        ok && via >= 5,
        format!(
            "min chaser clearance (r_c = 0.2) {}; city has {via} via-points",
            parts.join(", ")
        ),
    );
}

fn weight_trend(r: &mut Report) {
    let (config, esdf) = load("hiding");
    let run = |w: f64| {
        let mut c = config.clone();
        c.preplan.w_v = w;
        let esdf = esdf.clone();
        std::thread::spawn(move || run_mission(esdf, c).unwrap().metrics.aggregates())
    };
    let (lo, hi) = (run(1.0), run(5.0));
    let (lo, hi) = (lo.join().unwrap(), hi.join().unwrap());
    let ok = hi.avg_psi > lo.avg_psi
        && hi.occlusion_duration <= 0.8 * lo.occlusion_duration
        && lo.occlusion_duration > 0.0
        && hi.flight_distance > lo.flight_distance;
    r.line(
        "Visibility-weight trend",
        ok,
        format!(
            "hiding, w_v 1 -> 5: avg psi {:.3} -> {:.3}, occlusion {:.1} s -> {:.1} s, flight {:.1} m -> {:.1} m",
            lo.avg_psi,
            hi.avg_psi,
            lo.occlusion_duration,
            hi.occlusion_duration,
            lo.flight_distance,
            hi.flight_distance
        ),
    );
}

/// 100 x 100 x 20 voxels at 0.4 m: a 4 x 4 grid of 4 m blocks with 6 m streets.
fn throughput(r: &mut Report) {
    let mut g = VoxelGrid::new(Vec3::zeros(), 0.4, [100, 100, 20]).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let (x, y) = (4.0 + 10.0 * i as f64, 4.0 + 10.0 * j as f64);
            g.fill_box(
                Vec3::new(x, y, 0.0),
                Vec3::new(x + 4.0, y + 4.0, 3.0 + (i + j) as f64 % 3.0),
            );
        }
    }
    let esdf = Arc::new(compute_esdf(&g, 10.0).unwrap());
    let p = |x: f64, y: f64| Vec3::new(x, y, 1.0);
    let mut config: ScenarioConfig = serde_json::from_str(
        r#"{"map": "generated", "via_points": [], "target": {"start": [0, 0, 0]}, "chaser": {"position": [0, 0, 0]}}"#,
    )
    .unwrap();
    config.via_points = vec![p(31.0, 11.0), p(31.0, 31.0), p(11.0, 31.0)];
    config.target = TargetScript {
        start: p(2.0, 11.0),
        legs: config
            .via_points
            .iter()
            .map(|&to| ScriptLeg {
                to,
                speed: 1.0,
                hide: false,
            })
            .collect(),
    };
    config.chaser.position = Vec3::new(1.0, 11.0, 2.5);
    config.mission.time_limit = 80.0;
    let log = run_mission(esdf, config).unwrap();
    let mut ms = log.replan_ms.clone();
    ms.sort_by(f64::total_cmp);
    let median = ms[ms.len() / 2];
    let full = log
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Replan { .. }))
        .count();
    r.line(
        "Throughput",
        median < 200.0 && full > 0,
        format!(
            "median replan {median:.1} ms over {} cycles ({full} full plans), max {:.1} ms",
            ms.len(),
            ms.last().unwrap()
        ),
    );
}

fn determinism(r: &mut Report, runs: &Runs) {
    let csv = |log: &MissionLog| {
        let mut buf = Vec::new();
        log.metrics.write_csv(&mut buf).unwrap();
        buf
    };
    let city = runs.names.iter().position(|n| *n == "city").unwrap();
    let (config, esdf) = load("city");
    let again = run_mission(esdf, config).unwrap();
    let (a, b) = (csv(&runs.logs[city]), csv(&again));
    r.line(
        "Determinism",
        a == b,
        format!("two city runs, metrics.csv {} bytes, identical: {}", a.len(), a == b),
    );
}

fn main() -> ExitCode {
    let mut r = Report { failed: 0 };
    let names = vec!["trivial", "city", "hiding"];
    let handles: Vec<_> = names
        .iter()
        .map(|&n| {
            std::thread::spawn(move || {
                let (config, esdf) = load(n);
                let log = run_mission(esdf, config.clone()).unwrap();
                (config, log)
            })
        })
        .collect();
    esdf_oracle(&mut r);
    prediction(&mut r);
    preplanner(&mut r);
    let (configs, logs) = handles.into_iter().map(|h| h.join().unwrap()).unzip();
    let runs = Runs { names, configs, logs };
    for (name, log) in runs.names.iter().zip(&runs.logs) {
        assert!(log.finished, "{name} did not finish");
    }
    qp_correctness(&mut r, &runs);
    safety(&mut r, &runs);
    weight_trend(&mut r);
    throughput(&mut r);
    determinism(&mut r, &runs);
    if r.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
