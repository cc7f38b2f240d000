//! Headless closed-loop execution of a mission plan.

use helm_core::control::{Autopilot, Command, ControlMode, Setpoint, TransitionCause};

use crate::config::Config;
use crate::log::{Event, LogHeader, Outcome, RunLog, Termination, FORMAT};
use crate::mission::{MissionItem, MissionPlan};
use crate::sim::Sim;

/// Walks the plan one item at a time, turning items into autopilot
/// commands and deciding when each is done.
struct Sequencer<'a> {
    plan: &'a MissionPlan,
    index: usize,
    started_at: Option<u64>,
    loiter_radius: f64,
    control_hz: u32,
}

impl Sequencer<'_> {
    fn done(&self) -> bool {
        self.index >= self.plan.items.len()
    }

    fn current(&self) -> Option<usize> {
        self.started_at.map(|_| self.index)
    }

    fn commands(&self, item: &MissionItem) -> Vec<Command> {
        match *item {
            MissionItem::Waypoint {
                x,
                y,
                accept_radius,
                transit_speed,
            } => vec![
                Command::SetCruiseSpeed { speed: transit_speed },
                Command::Engage {
                    mode: ControlMode::GuidedPosition,
                    setpoint: Setpoint::Waypoint { x, y, accept_radius },
                },
            ],
            MissionItem::VelHeadLeg { speed, heading, .. } => vec![Command::Engage {
                mode: ControlMode::GuidedVelocityHeading,
                setpoint: Setpoint::VelHead { speed, heading },
            }],
            MissionItem::LoiterAt { x, y, .. } => vec![Command::Engage {
                mode: ControlMode::Loiter,
                setpoint: Setpoint::LoiterAnchor {
                    x,
                    y,
                    radius: self.loiter_radius,
                },
            }],
            MissionItem::SetMode { mode } => vec![Command::SetMode { mode }],
            MissionItem::Wait { .. } => Vec::new(),
        }
    }

    fn finished(&self, item: &MissionItem, tick: u64, started: u64, sim: &Sim) -> bool {
        match item {
            MissionItem::Waypoint { x, y, .. } => sim
                .last_output()
                .and_then(|o| o.arrived)
                .is_some_and(|(ax, ay)| ax == *x && ay == *y && tick > started),
            MissionItem::SetMode { .. } => true,
            other => {
                let d = other.duration().unwrap_or(0.0);
                let ticks = (d * self.control_hz as f64).round() as u64;
                tick - started >= ticks
            }
        }
    }

    /// Advances through finished items and starts the next one.
    fn poll(&mut self, sim: &mut Sim) {
        let tick = sim.tick_count();
        while !self.done() {
            let item = &self.plan.items[self.index];
            match self.started_at {
                None => {
                    sim.push_event(Event::ItemStarted {
                        index: self.index,
                        kind: item.kind().to_string(),
                    });
                    for c in self.commands(item) {
                        let _ = sim.apply(c);
                    }
                    self.started_at = Some(tick);
                    if !matches!(item, MissionItem::SetMode { .. }) {
                        return;
                    }
                }
                Some(started) => {
                    if !self.finished(item, tick, started, sim) {
                        return;
                    }
                }
            }
            sim.push_event(Event::ItemCompleted { index: self.index });
            self.index += 1;
            self.started_at = None;
        }
    }
}

pub fn run_mission(config: &Config, plan: &MissionPlan) -> RunLog {
    run_mission_seeded(config, plan, config.seed())
}

/// Runs `plan` to completion, fail-safe termination or timeout.
pub fn run_mission_seeded(config: &Config, plan: &MissionPlan, seed: u64) -> RunLog {
    let m = &config.file.mission;
    let mut sim = Sim::new(config, seed);
    sim.set_position_fix(m.position_fix);
    sim.controller_mut().set_home(plan.home[0], plan.home[1]);
    let mut seq = Sequencer {
        plan,
        index: 0,
        started_at: None,
        loiter_radius: config.file.control.loiter.radius,
        control_hz: config.file.rates.control_hz,
    };
    let timeout_ticks = (m.timeout * config.file.rates.control_hz as f64).round() as u64;
    let mut ticks = Vec::new();
    let mut failsafe = false;
    let termination = loop {
        if seq.done() {
            break Termination::Completed;
        }
        if failsafe {
            break Termination::FailsafeTerminated;
        }
        if sim.tick_count() >= timeout_ticks {
            break Termination::Timeout;
        }
        let t = sim.time();
        sim.begin_tick();
        if sim.tick_count() == 0 && m.arm {
            let _ = sim.apply(Command::Arm { armed: true });
        }
        let link_age = match m.link_loss_after {
            Some(t0) if t >= t0 => t - t0,
            _ => 0.0,
        };
        let c = sim.controller();
        if !c.battery_failsafe() && link_age <= config.file.control.failsafe.link_timeout {
            seq.poll(&mut sim);
        }
        let record = sim.end_tick(link_age, seq.current());
        let c = sim.controller();
        let link_hold = record.events.iter().any(|e| {
            matches!(
                e,
                Event::Failsafe {
                    cause: TransitionCause::LinkLoss,
                    ..
                }
            )
        });
        failsafe = link_hold || (c.battery_failsafe() && c.mode() == ControlMode::Loiter);
        ticks.push(record);
    };
    let battery = sim.battery();
    RunLog {
        header: LogHeader {
            format: FORMAT.to_string(),
            seed,
            rates: config.file.rates,
            plan: plan.clone(),
            world: config.file.world.clone(),
        },
        outcome: Outcome {
            termination,
            t: sim.time(),
            ticks: sim.tick_count(),
            physics_steps: sim.physics_steps(),
            energy_ah: battery.used_ah(),
            energy_wh: battery.used_wh(),
            battery: battery.fraction(),
        },
        ticks,
    }
}
