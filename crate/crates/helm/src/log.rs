//! Run logs and their file formats.
//!
//! JSON lines: one `header` line, one `tick` line per control tick, one
//! `outcome` line. CSV: the trajectory columns of [`CSV_HEADER`].

use std::io::{BufRead, Write};

use helm_core::control::{Command, ControlMode, HeadingTerms, PidTerms, Setpoint, TransitionCause};
use helm_core::dynamics::{ActuatorState, Measurement, PwmPair, VesselState};
use helm_core::world::World;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Rates;
use crate::mission::MissionPlan;

pub const FORMAT: &str = "helm-runlog/1";

pub const CSV_HEADER: [&str; 9] = ["t", "x", "y", "psi", "u", "sp_u", "sp_psi", "pwm_l", "pwm_r"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Thrust {
    /// N
    pub forward: f64,
    pub yaw: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ModeChange {
        from: ControlMode,
        to: ControlMode,
        cause: TransitionCause,
    },
    Failsafe {
        mode: ControlMode,
        cause: TransitionCause,
    },
    /// Waypoint reached; `distance` is measured, `truth_distance` true.
    Arrival {
        x: f64,
        y: f64,
        distance: f64,
        truth_distance: f64,
    },
    ItemStarted {
        index: usize,
        kind: String,
    },
    ItemCompleted {
        index: usize,
    },
    CommandRejected {
        command: Command,
        reason: String,
    },
}

/// One control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// s
    pub t: f64,
    /// Simulator state at the start of the tick.
    pub truth: VesselState,
    /// What the autopilot saw.
    pub measured: Measurement,
    pub mode: ControlMode,
    pub armed: bool,
    pub setpoint: Option<Setpoint>,
    /// Active mission item.
    pub item: Option<usize>,
    /// m/s
    pub speed_sp: f64,
    /// deg
    pub heading_sp: Option<f64>,
    pub speed_scale: f64,
    /// deg/s
    pub rate_ff: f64,
    /// Commanded thrust.
    pub thrust: Thrust,
    pub pwm: PwmPair,
    /// Static thrust the ESCs were producing at the start of the tick, N.
    pub actuators: ActuatorState,
    pub sectors_digest: u32,
    /// Nearest fused range in the bow cone, m.
    pub bow_distance: Option<f64>,
    /// True distance to the nearest obstacle, m.
    pub clearance: Option<f64>,
    pub speed_terms: PidTerms,
    pub heading_terms: HeadingTerms,
    /// State of charge.
    pub battery: f64,
    /// Charge drawn so far, Ah.
    pub energy_ah: f64,
    /// s
    pub link_age: f64,
    /// Telemetry was due on this tick.
    pub telemetry: bool,
    pub commands: Vec<Command>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub seed: u64,
    pub rates: Rates,
    pub plan: MissionPlan,
    pub world: World,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    FailsafeTerminated,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub termination: Termination,
    /// s
    pub t: f64,
    pub ticks: u64,
    pub physics_steps: u64,
    pub energy_ah: f64,
    pub energy_wh: f64,
    pub battery: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: LogHeader,
    pub ticks: Vec<TickRecord>,
    pub outcome: Outcome,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(LogHeader),
    Tick(Box<TickRecord>),
    Outcome(Outcome),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("log is missing its {0} line")]
    Missing(&'static str),
    #[error("line {0}: unexpected record")]
    Unexpected(usize),
}

impl RunLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), LogError> {
        let mut put = |line: &Line| -> Result<(), LogError> {
            serde_json::to_writer(&mut w, line).map_err(|source| LogError::Json { line: 0, source })?;
            w.write_all(b"\n")?;
            Ok(())
        };
        put(&Line::Header(self.header.clone()))?;
        for t in &self.ticks {
            put(&Line::Tick(Box::new(t.clone())))?;
        }
        put(&Line::Outcome(self.outcome.clone()))?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        out
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, LogError> {
        let mut header = None;
        let mut ticks = Vec::new();
        let mut outcome = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|source| LogError::Json { line: i + 1, source })?;
            match parsed {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Tick(t) if header.is_some() && outcome.is_none() => ticks.push(*t),
                Line::Outcome(o) if header.is_some() && outcome.is_none() => outcome = Some(o),
                _ => return Err(LogError::Unexpected(i + 1)),
            }
        }
        Ok(Self {
            header: header.ok_or(LogError::Missing("header"))?,
            ticks,
            outcome: outcome.ok_or(LogError::Missing("outcome"))?,
        })
    }

    /// Trajectory as seen by the autopilot, one row per tick.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LogError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for t in &self.ticks {
            let m = &t.measured;
            out.write_record([
                t.t.to_string(),
                m.x.to_string(),
                m.y.to_string(),
                m.psi.to_string(),
                m.speed.to_string(),
                t.speed_sp.to_string(),
                t.heading_sp.map(|h| h.to_string()).unwrap_or_default(),
                t.pwm.left.to_string(),
                t.pwm.right.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn events(&self) -> impl Iterator<Item = (&TickRecord, &Event)> {
        self.ticks.iter().flat_map(|t| t.events.iter().map(move |e| (t, e)))
    }
}
