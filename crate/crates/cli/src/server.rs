//! Interactive mode: the simulation runs on its own thread, an operator drives the
//! target over a websocket, and every client receives the live planner state.
//!
//! Server to client: `{"type":"frame", ...}` text messages. Client to server:
//! `{"type":"cmd","vx":..,"vy":..}` sets the target's planar velocity from the next
//! tick on; `{"type":"reset"}` restarts the scenario. Unknown fields are ignored.

use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use chase_core::mission::{Aggregates, Mission, MissionError, TargetControl, TickRecord};
use chase_core::scenario::ScenarioConfig;
use chase_core::world::EsdfGrid;
use chase_core::Vec3;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

#[derive(Debug, Clone, Copy)]
pub struct ServerOptions {
    /// Simulated seconds per wall-clock second.
    pub rate: f64,
    /// Upper bound on frames sent per wall-clock second.
    pub max_fps: f64,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            rate: 1.0,
            max_fps: 20.0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Flags {
    pub visible: bool,
    pub replanning: bool,
    pub infeasible: bool,
}

#[derive(Debug, Serialize)]
pub struct UiFrame {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub t: f64,
    pub target_pos: Vec3,
    pub chaser_pos: Vec3,
    pub yaw: f64,
    /// Velocity command applied during this tick.
    pub target_cmd: [f64; 2],
    pub prediction: Vec<Vec3>,
    pub skeleton: Vec<Vec3>,
    pub corridors: Vec<[Vec3; 8]>,
    pub flags: Flags,
    pub metrics: Aggregates,
}

impl UiFrame {
    pub fn new(mission: &Mission, record: &TickRecord, cmd: [f64; 2]) -> Self {
        let state = mission.state();
        let prediction = state.prediction.as_ref().map(|p| p.points.clone()).unwrap_or_default();
        let (skeleton, corridors) = match mission.current_preplan() {
            Some(pre) => (
                pre.skeleton.points.clone(),
                pre.corridors.iter().map(|c| c.corners()).collect(),
            ),
            None => (Vec::new(), Vec::new()),
        };
        Self {
            kind: "frame",
            t: record.t,
            target_pos: record.target,
            chaser_pos: record.chaser,
            yaw: record.yaw,
            target_cmd: cmd,
            prediction,
            skeleton,
            corridors,
            flags: Flags {
                visible: record.visible,
                replanning: record.replan.is_some(),
                infeasible: record.infeasible || state.trajectory.is_none(),
            },
            metrics: mission.log().metrics.aggregates(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ClientMessage {
    Cmd { vx: f64, vy: f64 },
    Reset,
}

struct Shared {
    cmd: Mutex<[f64; 2]>,
    reset: AtomicBool,
    stop: AtomicBool,
}

#[derive(Clone)]
struct AppState {
    shared: Arc<Shared>,
    frames: broadcast::Sender<Arc<str>>,
    map: Arc<str>,
}

/// Top-down map summary: per column, the number of voxels up to and including the
/// highest occupied one (x fastest).
#[derive(Debug, Serialize)]
struct MapInfo {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    heights: Vec<usize>,
}

impl MapInfo {
    fn new(esdf: &EsdfGrid) -> Self {
        let g = esdf.grid();
        let d = g.dims();
        let mut heights = vec![0; d[0] * d[1]];
        for [x, y, z] in g.iter_occupied() {
            let h = &mut heights[y * d[0] + x];
            *h = (*h).max(z + 1);
        }
        Self {
            origin: g.origin(),
            resolution: g.resolution(),
            dims: d,
            heights,
        }
    }
}

fn sim_loop(
    esdf: Arc<EsdfGrid>,
    config: ScenarioConfig,
    mut mission: Mission,
    shared: Arc<Shared>,
    frames: broadcast::Sender<Arc<str>>,
    opts: ServerOptions,
) {
    let period = Duration::from_secs_f64(config.mission.tick_dt / opts.rate);
    let min_gap = Duration::from_secs_f64(1.0 / opts.max_fps);
    let mut next = Instant::now();
    let mut last_sent: Option<Instant> = None;
    while !shared.stop.load(Ordering::Relaxed) {
        if shared.reset.swap(false, Ordering::Relaxed) {
            // the config was accepted at startup, so a fresh mission cannot fail
            mission = Mission::new(esdf.clone(), config.clone()).expect("validated scenario");
            *shared.cmd.lock().unwrap() = [0.0, 0.0];
        }
        let cmd = *shared.cmd.lock().unwrap();
        let record = mission.tick(TargetControl::Velocity { vx: cmd[0], vy: cmd[1] }).clone();
        let now = Instant::now();
        if last_sent.is_none_or(|s| now.duration_since(s) >= min_gap) {
            let frame = UiFrame::new(&mission, &record, cmd);
            if let Ok(text) = serde_json::to_string(&frame) {
                // no subscribers is fine
                let _ = frames.send(text.into());
                last_sent = Some(now);
            }
        }
        next += period;
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
        } else {
            next = now;
        }
    }
}

fn handle_client_message(shared: &Shared, text: &str) {
    match serde_json::from_str::<ClientMessage>(text) {
        Ok(ClientMessage::Cmd { vx, vy }) if vx.is_finite() && vy.is_finite() => {
            *shared.cmd.lock().unwrap() = [vx, vy];
        }
        Ok(ClientMessage::Reset) => shared.reset.store(true, Ordering::Relaxed),
        _ => {}
    }
}

async fn socket_loop(mut socket: WebSocket, state: AppState) {
    let mut rx = state.frames.subscribe();
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => handle_client_message(&state.shared, text.as_str()),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn ws_route(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| socket_loop(socket, state))
}

async fn map_route(State(state): State<AppState>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], state.map.to_string())
}

pub struct Server {
    addr: SocketAddr,
    shared: Arc<Shared>,
    task: tokio::task::JoinHandle<io::Result<()>>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Serves until the listener fails.
    pub async fn wait(self) -> io::Result<()> {
        match self.task.await {
            Ok(r) => r,
            Err(e) => Err(io::Error::other(e)),
        }
    }

    pub fn shutdown(&self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        self.task.abort();
    }
}

#[derive(Debug)]
pub enum StartError {
    Mission(MissionError),
    Io(io::Error),
}

impl std::fmt::Display for StartError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Mission(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for StartError {}

/// Validates the scenario, starts the simulation thread and binds the HTTP listener.
pub async fn start(
    esdf: Arc<EsdfGrid>,
    config: ScenarioConfig,
    addr: SocketAddr,
    opts: ServerOptions,
) -> Result<Server, StartError> {
    let mission = Mission::new(esdf.clone(), config.clone()).map_err(StartError::Mission)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(StartError::Io)?;
    let addr = listener.local_addr().map_err(StartError::Io)?;
    let shared = Arc::new(Shared {
        cmd: Mutex::new([0.0, 0.0]),
        reset: AtomicBool::new(false),
        stop: AtomicBool::new(false),
    });
    let (frames, _) = broadcast::channel(64);
    let state = AppState {
        shared: shared.clone(),
        frames: frames.clone(),
        map: serde_json::to_string(&MapInfo::new(&esdf))
            .map_err(|e| StartError::Io(e.into()))?
            .into(),
    };
    {
        let shared = shared.clone();
        thread::spawn(move || sim_loop(esdf, config, mission, shared, frames, opts));
    }
    let app = Router::new()
        .route("/ws", get(ws_route))
        .route("/map", get(map_route))
        .with_state(state);
    let task = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok(Server { addr, shared, task })
}
