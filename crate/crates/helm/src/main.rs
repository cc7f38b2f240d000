use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use helm::config::{load_file, ConfigError};
use helm::export::{export, Format};
use helm::log::{RunLog, Termination};
use helm::metrics::compute_metrics;
use helm::size::size_report;

#[derive(Parser)]
#[command(name = "helm", version, about = "Autopilot simulation and helm-link service")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Resistance breakdown, drag curve and thrust plan.
    Size {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the configured mission headless.
    Sim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Any of jsonl, csv, plotdata; repeatable.
        #[arg(long = "format", default_values = ["jsonl", "csv", "plotdata"])]
        formats: Vec<Format>,
    },
    /// Serve helm-link over TCP and WebSocket.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds per wall second; `inf` runs unpaced.
        #[arg(long)]
        timescale: Option<f64>,
    },
    /// Metrics of a recorded run.
    Report {
        log: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// JSON Schema of the configuration file.
    Schema,
    /// Protocol reference frames as JSON.
    Vectors,
}

enum Failure {
    Config(ConfigError),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure::Other(e.to_string())
}

fn json(v: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(other)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Cmd::Size { config, json: as_json } => {
            let config = load_file(&config)?;
            let report = size_report(&config).map_err(other)?;
            if as_json {
                println!("{}", json(&report)?);
            } else {
                print!("{report}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sim {
            config,
            seed,
            out,
            formats,
        } => {
            let config = load_file(&config)?;
            let plan = config.plan().map_err(|e| Failure::Config(e.into()))?;
            let log = helm::run_mission_seeded(&config, &plan, seed.unwrap_or(config.seed()));
            for f in formats {
                let path = export(&log, f, &out).map_err(other)?;
                eprintln!("wrote {}", path.display());
            }
            println!("{}", json(&compute_metrics(&log, &plan))?);
            Ok(match log.outcome.termination {
                Termination::Completed => ExitCode::SUCCESS,
                Termination::FailsafeTerminated => ExitCode::from(3),
                Termination::Timeout => ExitCode::from(1),
            })
        }
        Cmd::Serve { config, seed, timescale } => {
            let config = load_file(&config)?;
            let timescale = timescale.unwrap_or(config.file.service.timescale);
            if timescale.is_nan() || timescale <= 0.0 {
                return Err(Failure::Other("timescale must be positive".into()));
            }
            let handle = helm::service::serve(&config, seed.unwrap_or(config.seed()), timescale).map_err(other)?;
            eprintln!("helm-link tcp://{} ws://{}/link", handle.tcp_addr, handle.ws_addr);
            handle.wait();
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Report { log, json: as_json } => {
            let file = File::open(&log).map_err(|e| other(format!("{}: {e}", log.display())))?;
            let log = RunLog::read_jsonl(BufReader::new(file)).map_err(other)?;
            let m = compute_metrics(&log, &log.header.plan);
            if as_json {
                println!("{}", json(&m)?);
            } else {
                println!("termination      {:?}", m.termination);
                println!("duration         {:.2} s", m.duration);
                if let Some(v) = m.speed_rmse {
                    println!("speed rmse       {v:.4} m/s");
                }
                if let Some(v) = m.heading_rmse {
                    println!("heading rmse     {v:.3} deg");
                }
                for leg in &m.legs {
                    let xt = leg.cross_track.map(|c| c.mean_abs).unwrap_or(f64::NAN);
                    let tt = leg.time_to_waypoint.unwrap_or(f64::NAN);
                    println!("leg {:<3}          cross-track {xt:.3} m  time {tt:.1} s", leg.item);
                }
                if let Some(v) = m.loiter_max_excursion {
                    println!("loiter excursion {v:.3} m");
                }
                println!("energy           {:.4} Ah  {:.2} Wh", m.energy_ah, m.energy_wh);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Schema => {
            println!("{}", json(&helm::config::Config::schema())?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Vectors => {
            print!("{}", helm::vectors::vectors_json());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
