//! Simulation, mission runner, file formats and the helm-link service for
//! the `helm-core` autopilot.

pub mod battery;
pub mod config;
pub mod export;
pub mod log;
pub mod metrics;
pub mod mission;
pub mod runner;
pub mod service;
pub mod sim;
pub mod size;
pub mod vectors;

pub use config::{load_file, load_str, Config, ConfigError, SchemaError};
pub use log::RunLog;
pub use metrics::{compute_metrics, Metrics};
pub use mission::{generate_survey_pattern, MissionItem, MissionPlan};
pub use runner::{run_mission, run_mission_seeded};
