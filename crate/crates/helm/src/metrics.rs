//! Tracking-quality figures derived from a run log.

use helm_core::control::{ControlMode, Setpoint};
use helm_core::wrap_error;
use serde::{Deserialize, Serialize};

use crate::log::{Event, RunLog, Termination, TickRecord};
use crate::mission::{MissionItem, MissionPlan};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub samples: usize,
    pub rmse: f64,
    pub max_abs: f64,
    pub mean_abs: f64,
}

impl ErrorStats {
    pub fn from_errors(errors: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut n, mut sq, mut abs, mut max) = (0usize, 0.0, 0.0, 0.0f64);
        for e in errors {
            n += 1;
            sq += e * e;
            abs += e.abs();
            max = max.max(e.abs());
        }
        (n > 0).then(|| Self {
            samples: n,
            rmse: (sq / n as f64).sqrt(),
            max_abs: max,
            mean_abs: abs / n as f64,
        })
    }
}

/// A velocity/heading leg after its settle window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySegment {
    pub item: usize,
    /// s
    pub start: f64,
    pub end: f64,
    /// m/s
    pub speed: ErrorStats,
    /// deg
    pub heading: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegMetrics {
    pub item: usize,
    pub from: [f64; 2],
    pub to: [f64; 2],
    /// Perpendicular distance to the leg segment, m.
    pub cross_track: Option<ErrorStats>,
    /// s from item start to arrival
    pub time_to_waypoint: Option<f64>,
    /// Measured distance to the waypoint at arrival, m.
    pub arrival_error: Option<f64>,
    pub arrival_error_truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoiterMetrics {
    pub item: usize,
    pub anchor: [f64; 2],
    /// s spent loitering within the item
    pub duration: f64,
    /// Largest measured distance from the anchor, m.
    pub max_excursion: f64,
    pub max_excursion_truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub termination: Termination,
    /// s
    pub duration: f64,
    pub speed_rmse: Option<f64>,
    pub heading_rmse: Option<f64>,
    pub steady: Vec<SteadySegment>,
    pub legs: Vec<LegMetrics>,
    pub loiter: Vec<LoiterMetrics>,
    pub loiter_max_excursion: Option<f64>,
    /// Ah
    pub energy_ah: f64,
    /// Wh
    pub energy_wh: f64,
}

/// Distance from `p` to the segment `a`-`b`.
pub fn distance_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - s * dx).hypot(p[1] - a[1] - s * dy)
}

fn item_ticks(log: &RunLog, item: usize) -> impl Iterator<Item = &TickRecord> {
    log.ticks.iter().filter(move |t| t.item == Some(item))
}

fn pos(t: &TickRecord) -> [f64; 2] {
    [t.measured.x, t.measured.y]
}

pub fn compute_metrics(log: &RunLog, plan: &MissionPlan) -> Metrics {
    let mut steady = Vec::new();
    let mut legs = Vec::new();
    let mut loiter = Vec::new();
    let mut prev_target: Option<[f64; 2]> = None;
    for (i, item) in plan.items.iter().enumerate() {
        let leg_start = prev_target;
        prev_target = match *item {
            MissionItem::Waypoint { x, y, .. } => Some([x, y]),
            MissionItem::LoiterAt { x, y, .. } => Some([x, y]),
            MissionItem::Wait { .. } | MissionItem::SetMode { .. } => prev_target,
            MissionItem::VelHeadLeg { .. } => None,
        };
        let Some(first) = item_ticks(log, i).next() else {
            continue;
        };
        let start = first.t;
        match *item {
            MissionItem::VelHeadLeg { .. } => {
                let window: Vec<&TickRecord> = item_ticks(log, i)
                    .filter(|t| t.mode == ControlMode::GuidedVelocityHeading && t.t - start >= plan.settle_window)
                    .collect();
                let speed = ErrorStats::from_errors(window.iter().map(|t| t.measured.speed - t.speed_sp));
                let heading = ErrorStats::from_errors(
                    window
                        .iter()
                        .filter_map(|t| t.heading_sp.map(|h| wrap_error(h, t.measured.psi))),
                );
                if let (Some(speed), Some(heading)) = (speed, heading) {
                    steady.push(SteadySegment {
                        item: i,
                        start: window[0].t,
                        end: window[window.len() - 1].t,
                        speed,
                        heading,
                    });
                }
            }
            MissionItem::Waypoint { x, y, .. } => {
                let from = leg_start.unwrap_or(pos(first));
                let to = [x, y];
                let cross_track = ErrorStats::from_errors(
                    item_ticks(log, i)
                        .filter(|t| t.mode == ControlMode::GuidedPosition)
                        .map(|t| distance_to_segment(pos(t), from, to)),
                );
                let arrival = item_ticks(log, i).find_map(|t| {
                    t.events.iter().find_map(|e| match *e {
                        Event::Arrival {
                            x: ax,
                            y: ay,
                            distance,
                            truth_distance,
                        } if ax == x && ay == y => Some((t.t, distance, truth_distance)),
                        _ => None,
                    })
                });
                legs.push(LegMetrics {
                    item: i,
                    from,
                    to,
                    cross_track,
                    time_to_waypoint: arrival.map(|a| a.0 - start),
                    arrival_error: arrival.map(|a| a.1),
                    arrival_error_truth: arrival.map(|a| a.2),
                });
            }
            MissionItem::LoiterAt { .. } | MissionItem::Wait { .. } => {
                let mut anchor = None;
                let (mut n, mut max, mut max_truth) = (0usize, 0.0f64, 0.0f64);
                for t in item_ticks(log, i).filter(|t| t.mode == ControlMode::Loiter) {
                    if let Some(Setpoint::LoiterAnchor { x, y, .. }) = t.setpoint {
                        anchor = Some([x, y]);
                        n += 1;
                        max = max.max((t.measured.x - x).hypot(t.measured.y - y));
                        max_truth = max_truth.max((t.truth.x - x).hypot(t.truth.y - y));
                    }
                }
                if let Some(anchor) = anchor {
                    loiter.push(LoiterMetrics {
                        item: i,
                        anchor,
                        duration: n as f64 / log.header.rates.control_hz as f64,
                        max_excursion: max,
                        max_excursion_truth: max_truth,
                    });
                }
            }
            MissionItem::SetMode { .. } => {}
        }
    }
    let pooled = |f: fn(&SteadySegment) -> &ErrorStats| {
        let n: usize = steady.iter().map(|s| f(s).samples).sum();
        (n > 0).then(|| {
            let sq: f64 = steady.iter().map(|s| f(s).rmse.powi(2) * f(s).samples as f64).sum();
            (sq / n as f64).sqrt()
        })
    };
    Metrics {
        termination: log.outcome.termination,
        duration: log.outcome.t,
        speed_rmse: pooled(|s| &s.speed),
        heading_rmse: pooled(|s| &s.heading),
        loiter_max_excursion: loiter.iter().map(|l| l.max_excursion).reduce(f64::max),
        steady,
        legs,
        loiter,
        energy_ah: log.outcome.energy_ah,
        energy_wh: log.outcome.energy_wh,
    }
}
