use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use chase_cli::server::{self, ServerOptions};
use chase_cli::{field_csv, load, parse_point, run_config, run_summary, sweep, sweep_table, CliResult};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chase", version, about = "Occlusion-aware target chasing planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and write metrics.csv, summary.json, trajectory.csv and events.log.
    Run {
        config: PathBuf,
        /// Output directory (default: runs/<config name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a scenario for several visibility weights and compare the runs.
    Sweep {
        config: PathBuf,
        /// Comma-separated visibility weights, e.g. 1.0,5.0.
        #[arg(long, value_delimiter = ',', required = true)]
        wv: Vec<f64>,
        /// Also write each run's artifacts under <out>/wv_<w>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump a horizontal slice of the visibility field for a target position as CSV.
    Field {
        config: PathBuf,
        /// Target position x,y,z.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        target: chase_core::Vec3,
        /// Slice height (default: target height).
        #[arg(long)]
        z: Option<f64>,
        #[arg(long, default_value_t = 0.2)]
        stride: f64,
        #[arg(long, default_value = "field.csv")]
        out: PathBuf,
    },
    /// Serve the scenario interactively over a websocket at /ws (map summary at /map).
    Serve {
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Simulation speed relative to wall-clock time.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out } => {
            let (scenario, esdf) = load(&config)?;
            let out = out.unwrap_or_else(|| {
                let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned());
                PathBuf::from("runs").join(stem.unwrap_or_else(|| "run".into()))
            });
            let log = run_config(&esdf, &scenario.config, Some(&out))?;
            println!("{}", run_summary(&log));
            println!("artifacts in {}", out.display());
        }
        Command::Sweep { config, wv, out } => {
            let (scenario, esdf) = load(&config)?;
            let rows = sweep(&esdf, &scenario.config, &wv, out.as_deref())?;
            print!("{}", sweep_table(&rows));
        }
        Command::Field {
            config,
            target,
            z,
            stride,
            out,
        } => {
            let (_, esdf) = load(&config)?;
            let n = field_csv(&esdf, &target, z.unwrap_or(target.z), stride, &out)?;
            println!("wrote {n} samples to {}", out.display());
        }
        Command::Serve {
            config,
            port,
            host,
            rate,
        } => {
            if !(rate > 0.0) {
                return Err("--rate must be positive".into());
            }
            let (scenario, esdf) = load(&config)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(async move {
                let opts = ServerOptions {
                    rate,
                    ..Default::default()
                };
                let srv = server::start(esdf, scenario.config, SocketAddr::new(host, port), opts)
                    .await
                    .map_err(|e| e.to_string())?;
                println!("serving on ws://{}/ws", srv.local_addr());
                srv.wait().await.map_err(|e| e.to_string())
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
