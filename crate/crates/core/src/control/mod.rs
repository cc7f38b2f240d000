//! Mode management and the cascaded speed/heading autopilot.
//!
//! [`Controller`] is ticked once per control period with the latest
//! navigation measurement and obstacle ring, and returns the pulse widths
//! for both sides together with every internal term for telemetry.

pub mod guidance;
pub mod mixer;
pub mod pid;

use alloc::vec::Vec;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::angle::{wrap_360, wrap_error};
use crate::dynamics::{Measurement, PwmPair, ThrusterModel};
use crate::perception::{ProximityPolicy, SectorArray};

pub use guidance::{failsafe_step, l1_heading, loiter_step, FailsafeConfig, L1Output, LoiterParams};
pub use mixer::{mix, MixerLimits};
pub use pid::{Pid, PidGains, PidTerms};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[repr(u8)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum ControlMode {
    Manual = 0,
    GuidedVelocityHeading = 1,
    GuidedPosition = 2,
    Loiter = 3,
    Hold = 4,
    ReturnToLaunch = 5,
}

impl ControlMode {
    pub const ALL: [ControlMode; 6] = [
        ControlMode::Manual,
        ControlMode::GuidedVelocityHeading,
        ControlMode::GuidedPosition,
        ControlMode::Loiter,
        ControlMode::Hold,
        ControlMode::ReturnToLaunch,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ControlMode::Manual => "manual",
            ControlMode::GuidedVelocityHeading => "guided_velocity_heading",
            ControlMode::GuidedPosition => "guided_position",
            ControlMode::Loiter => "loiter",
            ControlMode::Hold => "hold",
            ControlMode::ReturnToLaunch => "return_to_launch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Setpoint {
    /// Normalized per-side commands in `[-1, 1]`.
    Manual { left: f64, right: f64 },
    /// m/s, compass deg
    VelHead { speed: f64, heading: f64 },
    /// m east, m north, m
    Waypoint { x: f64, y: f64, accept_radius: f64 },
    /// m east, m north, dead-band radius m
    LoiterAnchor { x: f64, y: f64, radius: f64 },
}

pub const DEFAULT_ACCEPT_RADIUS: f64 = 2.0;

impl Setpoint {
    pub fn waypoint(x: f64, y: f64) -> Self {
        Setpoint::Waypoint {
            x,
            y,
            accept_radius: DEFAULT_ACCEPT_RADIUS,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Setpoint::Manual { .. } => "manual",
            Setpoint::VelHead { .. } => "vel_head",
            Setpoint::Waypoint { .. } => "waypoint",
            Setpoint::LoiterAnchor { .. } => "loiter_anchor",
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |field: &'static str, value: f64| Err(ControlError::InvalidSetpoint { field, value });
        match *self {
            Setpoint::Manual { left, right } => {
                for (field, v) in [("left", left), ("right", right)] {
                    if !(-1.0..=1.0).contains(&v) {
                        return bad(field, v);
                    }
                }
            }
            Setpoint::VelHead { speed, heading } => {
                if !(speed >= 0.0 && speed.is_finite()) {
                    return bad("speed", speed);
                }
                if !(0.0..360.0).contains(&heading) {
                    return bad("heading", heading);
                }
            }
            Setpoint::Waypoint { x, y, accept_radius } => {
                if !x.is_finite() {
                    return bad("x", x);
                }
                if !y.is_finite() {
                    return bad("y", y);
                }
                if !(accept_radius > 0.0 && accept_radius.is_finite()) {
                    return bad("accept_radius", accept_radius);
                }
            }
            Setpoint::LoiterAnchor { x, y, radius } => {
                if !x.is_finite() {
                    return bad("x", x);
                }
                if !y.is_finite() {
                    return bad("y", y);
                }
                if !(radius >= 0.0 && radius.is_finite()) {
                    return bad("radius", radius);
                }
            }
        }
        Ok(())
    }

    /// Whether this setpoint is the kind `mode` consumes. Hold and return to
    /// launch take no user setpoint.
    pub fn matches(&self, mode: ControlMode) -> bool {
        matches!(
            (mode, self),
            (ControlMode::Manual, Setpoint::Manual { .. })
                | (ControlMode::GuidedVelocityHeading, Setpoint::VelHead { .. })
                | (ControlMode::GuidedPosition, Setpoint::Waypoint { .. })
                | (ControlMode::Loiter, Setpoint::LoiterAnchor { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ControlError {
    #[error("setpoint {setpoint} does not apply to mode {}", mode.name())]
    ModeMismatch { mode: ControlMode, setpoint: &'static str },
    #[error("invalid setpoint field {field}: {value}")]
    InvalidSetpoint { field: &'static str, value: f64 },
    #[error("arming refused: no valid position fix")]
    ArmRefused,
    #[error("command refused while fail-safe {} is active", mode.name())]
    FailsafeActive { mode: ControlMode },
    #[error("invalid control parameter {field}: {value}")]
    Parameter { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TransitionCause {
    Command,
    Arrival,
    LinkLoss,
    LowBattery,
}

impl TransitionCause {
    pub fn name(self) -> &'static str {
        match self {
            TransitionCause::Command => "command",
            TransitionCause::Arrival => "arrival",
            TransitionCause::LinkLoss => "link_loss",
            TransitionCause::LowBattery => "low_battery",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Transition {
    pub from: ControlMode,
    pub to: ControlMode,
    pub cause: TransitionCause,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ControlConfig {
    /// Heading error (deg) to yaw-rate setpoint (deg/s).
    pub heading_outer: PidGains,
    /// Yaw-rate error (deg/s) to yaw thrust (N).
    pub heading_inner: PidGains,
    /// Speed error (m/s) to forward thrust (N).
    pub speed: PidGains,
    /// N per m/s of speed setpoint added ahead of the speed PID.
    pub speed_feedforward: f64,
    /// m
    pub l1_distance: f64,
    /// Speed used in guided position and return to launch, m/s.
    pub cruise_speed: f64,
    /// Speed setpoint per meter of remaining distance near a waypoint, 1/s.
    pub approach_gain: f64,
    /// m/s
    pub min_approach_speed: f64,
    pub steering_priority: bool,
    pub loiter: LoiterParams,
    pub failsafe: FailsafeConfig,
    pub proximity: ProximityPolicy,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            heading_outer: PidGains::new(1.2, 0.02, 0.0, 5.0, 30.0),
            heading_inner: PidGains::new(4.0, 1.0, 0.0, 40.0, 120.0),
            speed: PidGains::new(150.0, 40.0, 0.0, 200.0, 644.0),
            speed_feedforward: 40.0,
            l1_distance: 5.0,
            cruise_speed: 1.5,
            approach_gain: 0.3,
            min_approach_speed: 0.4,
            steering_priority: true,
            loiter: LoiterParams::default(),
            failsafe: FailsafeConfig::default(),
            proximity: ProximityPolicy::default(),
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (field, g) in [
            ("heading_outer", &self.heading_outer),
            ("heading_inner", &self.heading_inner),
            ("speed", &self.speed),
        ] {
            if !g.is_valid() {
                return Err(ControlError::Parameter { field, value: g.kp });
            }
        }
        let positive = [
            ("l1_distance", self.l1_distance),
            ("cruise_speed", self.cruise_speed),
            ("failsafe.link_timeout", self.failsafe.link_timeout),
            ("loiter.max_creep", self.loiter.max_creep),
            ("loiter.creep_gain", self.loiter.creep_gain),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ControlError::Parameter { field, value });
            }
        }
        let non_negative = [
            ("speed_feedforward", self.speed_feedforward),
            ("approach_gain", self.approach_gain),
            ("min_approach_speed", self.min_approach_speed),
            ("loiter.radius", self.loiter.radius),
            ("proximity.slow_distance", self.proximity.slow_distance),
            ("proximity.stop_distance", self.proximity.stop_distance),
        ];
        for (field, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ControlError::Parameter { field, value });
            }
        }
        if !(0.0..=1.0).contains(&self.failsafe.low_battery) {
            return Err(ControlError::Parameter {
                field: "failsafe.low_battery",
                value: self.failsafe.low_battery,
            });
        }
        if !(0.0..=1.0).contains(&self.proximity.slow_scale) {
            return Err(ControlError::Parameter {
                field: "proximity.slow_scale",
                value: self.proximity.slow_scale,
            });
        }
        if self.proximity.stop_distance > self.proximity.slow_distance {
            return Err(ControlError::Parameter {
                field: "proximity.stop_distance",
                value: self.proximity.stop_distance,
            });
        }
        Ok(())
    }
}

/// Terms of one heading-controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HeadingTerms {
    /// deg
    pub error: f64,
    /// deg/s
    pub rate_sp: f64,
    /// N
    pub t_yaw: f64,
    pub outer: PidTerms,
    pub inner: PidTerms,
}

/// Cascaded heading loop: the outer PID turns heading error into a yaw-rate
/// setpoint (plus `rate_ff`, bounded by the outer output limit), the inner
/// PID turns yaw-rate error into yaw thrust. Positive `t_yaw` turns
/// clockwise.
pub fn heading_controller(
    psi_sp: f64,
    psi: f64,
    r: f64,
    rate_ff: f64,
    dt: f64,
    outer: &mut Pid,
    inner: &mut Pid,
) -> HeadingTerms {
    let error = wrap_error(psi_sp, psi);
    let o = outer.update_with_rate(error, r, dt);
    let limit = outer.gains.output_limit;
    let rate_sp = (o.output + rate_ff).clamp(-limit, limit);
    let i = inner.update(rate_sp - r, r, dt);
    HeadingTerms {
        error,
        rate_sp,
        t_yaw: i.output,
        outer: o,
        inner: i,
    }
}

/// Speed loop with a linear feedforward. A zero setpoint stops the thrusters
/// outright and clears the integrator; otherwise feedforward plus PID stays
/// within the PID output range, which [`Controller`] sets to
/// `[0, 2 * max side]`.
pub fn speed_controller(u_sp: f64, u_meas: f64, dt: f64, feedforward: f64, pid: &mut Pid) -> PidTerms {
    if u_sp <= 0.0 {
        pid.reset();
        return PidTerms::default();
    }
    pid.update_biased(u_sp - u_meas, u_meas, dt, feedforward * u_sp)
}

/// Health inputs consulted by the fail-safes each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Health {
    /// s since the last command-link message
    pub link_age: f64,
    /// remaining fraction in `[0, 1]`
    pub battery: f64,
    pub position_fix: bool,
}

impl Default for Health {
    fn default() -> Self {
        Self {
            link_age: 0.0,
            battery: 1.0,
            position_fix: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Command {
    Arm { armed: bool },
    /// Enter a mode with its default setpoint.
    SetMode { mode: ControlMode },
    /// Replace the setpoint of the active mode.
    SetSetpoint { setpoint: Setpoint },
    /// Enter a mode together with its setpoint.
    Engage { mode: ControlMode, setpoint: Setpoint },
    /// m/s
    SetCruiseSpeed { speed: f64 },
}

/// Everything one control tick decided.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ControlOutput {
    pub mode: ControlMode,
    pub armed: bool,
    pub setpoint: Option<Setpoint>,
    /// Speed setpoint after guidance and obstacle scaling, m/s.
    pub speed_sp: f64,
    /// deg
    pub heading_sp: Option<f64>,
    /// Obstacle policy factor applied to the speed setpoint.
    pub speed_scale: f64,
    /// deg/s
    pub rate_ff: f64,
    /// N
    pub t_forward: f64,
    pub t_yaw: f64,
    pub t_left: f64,
    pub t_right: f64,
    pub pwm: PwmPair,
    pub speed_terms: PidTerms,
    pub heading_terms: HeadingTerms,
    pub transitions: Vec<Transition>,
    /// Waypoint reached on this tick.
    pub arrived: Option<(f64, f64)>,
}

/// Anything that can drive the vessel from the sim or service loop.
pub trait Autopilot {
    fn apply(&mut self, command: Command, meas: &Measurement) -> Result<(), ControlError>;
    fn tick(&mut self, meas: &Measurement, sectors: &SectorArray, health: &Health, dt: f64) -> ControlOutput;
    fn mode(&self) -> ControlMode;
    fn armed(&self) -> bool;
}

/// How side thrust in newtons maps onto the ESC signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorMap {
    pub thruster: ThrusterModel,
    pub thrusters_per_side: u32,
}

impl ActuatorMap {
    pub fn max_thrust_per_side(&self) -> f64 {
        self.thrusters_per_side as f64 * self.thruster.max_static_thrust
    }

    pub fn pwm_for(&self, side_thrust: f64) -> f64 {
        self.thruster.pwm(side_thrust / self.max_thrust_per_side())
    }
}

/// The mode state machine and its loops.
#[derive(Debug, Clone)]
pub struct Controller {
    pub config: ControlConfig,
    actuators: ActuatorMap,
    mode: ControlMode,
    setpoint: Option<Setpoint>,
    armed: bool,
    home: (f64, f64),
    cruise_speed: f64,
    hold_heading: Option<f64>,
    battery_latched: bool,
    link_lost: bool,
    heading_outer: Pid,
    heading_inner: Pid,
    speed_pid: Pid,
    pending: Vec<Transition>,
}

impl Controller {
    pub fn new(config: ControlConfig, actuators: ActuatorMap, home: (f64, f64)) -> Result<Self, ControlError> {
        config.validate()?;
        let max = actuators.max_thrust_per_side();
        let mut speed_gains = config.speed;
        speed_gains.output_limit = speed_gains.output_limit.min(2.0 * max);
        let mut inner = config.heading_inner;
        inner.output_limit = inner.output_limit.min(max);
        Ok(Self {
            actuators,
            mode: ControlMode::Hold,
            setpoint: None,
            armed: false,
            home,
            cruise_speed: config.cruise_speed,
            hold_heading: None,
            battery_latched: false,
            link_lost: false,
            heading_outer: Pid::new(config.heading_outer),
            heading_inner: Pid::new(inner),
            speed_pid: Pid::new(speed_gains).with_output_range(0.0, 2.0 * max),
            pending: Vec::new(),
            config,
        })
    }

    pub fn setpoint(&self) -> Option<Setpoint> {
        self.setpoint
    }

    pub fn home(&self) -> (f64, f64) {
        self.home
    }

    pub fn set_home(&mut self, x: f64, y: f64) {
        self.home = (x, y);
    }

    pub fn cruise_speed(&self) -> f64 {
        self.cruise_speed
    }

    /// True once low battery has forced a return to launch.
    pub fn battery_failsafe(&self) -> bool {
        self.battery_latched
    }

    pub fn actuators(&self) -> &ActuatorMap {
        &self.actuators
    }

    fn reset_loops(&mut self) {
        self.heading_outer.reset();
        self.heading_inner.reset();
        self.speed_pid.reset();
    }

    fn switch(&mut self, to: ControlMode, setpoint: Option<Setpoint>, cause: TransitionCause) {
        if to != self.mode {
            self.pending.push(Transition {
                from: self.mode,
                to,
                cause,
            });
            self.reset_loops();
            self.hold_heading = None;
        }
        self.mode = to;
        self.setpoint = setpoint;
    }

    fn default_setpoint(&self, mode: ControlMode, meas: &Measurement) -> Option<Setpoint> {
        match mode {
            ControlMode::Manual => Some(Setpoint::Manual { left: 0.0, right: 0.0 }),
            ControlMode::GuidedVelocityHeading => Some(Setpoint::VelHead {
                speed: 0.0,
                heading: wrap_360(meas.psi),
            }),
            ControlMode::GuidedPosition => self.setpoint.filter(|s| s.matches(mode)),
            ControlMode::Loiter => Some(Setpoint::LoiterAnchor {
                x: meas.x,
                y: meas.y,
                radius: self.config.loiter.radius,
            }),
            ControlMode::Hold => None,
            ControlMode::ReturnToLaunch => Some(Setpoint::waypoint(self.home.0, self.home.1)),
        }
    }

    fn check_failsafe(&self) -> Result<(), ControlError> {
        if self.battery_latched {
            return Err(ControlError::FailsafeActive {
                mode: ControlMode::ReturnToLaunch,
            });
        }
        Ok(())
    }

    /// Mode transitions recorded since the last tick, oldest first.
    pub fn take_transitions(&mut self) -> Vec<Transition> {
        core::mem::take(&mut self.pending)
    }

    fn rtl_target(&self) -> Setpoint {
        Setpoint::waypoint(self.home.0, self.home.1)
    }

    fn apply_failsafes(&mut self, health: &Health, meas: &Measurement) {
        match failsafe_step(health.link_age, health.battery, &self.config.failsafe) {
            Some(ControlMode::ReturnToLaunch) if !self.battery_latched => {
                self.battery_latched = true;
                let target = self.rtl_target();
                self.switch(ControlMode::ReturnToLaunch, Some(target), TransitionCause::LowBattery);
            }
            Some(ControlMode::Hold) if !self.link_lost && !self.battery_latched => {
                self.link_lost = true;
                let sp = self.default_setpoint(ControlMode::Hold, meas);
                self.switch(ControlMode::Hold, sp, TransitionCause::LinkLoss);
            }
            None => self.link_lost = false,
            _ => {}
        }
    }

    fn guided(&mut self, speed_sp: f64, heading_sp: f64, rate_ff: f64, meas: &Measurement, dt: f64, out: &mut ControlOutput) {
        let speed = speed_controller(
            speed_sp,
            meas.speed,
            dt,
            self.config.speed_feedforward,
            &mut self.speed_pid,
        );
        let heading = heading_controller(
            heading_sp,
            meas.psi,
            meas.yaw_rate,
            rate_ff,
            dt,
            &mut self.heading_outer,
            &mut self.heading_inner,
        );
        out.speed_sp = speed_sp;
        out.heading_sp = Some(heading_sp);
        out.rate_ff = rate_ff;
        out.speed_terms = speed;
        out.heading_terms = heading;
        out.t_forward = speed.output;
        out.t_yaw = heading.t_yaw;
    }

    /// Shrinks the speed setpoint while the bow points away from the desired
    /// heading so the vessel turns before it transits.
    fn heading_gate(speed: f64, heading_sp: f64, psi: f64) -> f64 {
        let c = libm::cos(wrap_error(heading_sp, psi).to_radians());
        speed * c.max(0.0)
    }

    fn tick_inner(&mut self, meas: &Measurement, sectors: &SectorArray, health: &Health, dt: f64) -> ControlOutput {
        self.apply_failsafes(health, meas);
        let mut out = ControlOutput {
            mode: self.mode,
            armed: self.armed,
            setpoint: self.setpoint,
            speed_sp: 0.0,
            heading_sp: None,
            speed_scale: 1.0,
            rate_ff: 0.0,
            t_forward: 0.0,
            t_yaw: 0.0,
            t_left: 0.0,
            t_right: 0.0,
            pwm: PwmPair::neutral(&self.actuators.thruster),
            speed_terms: PidTerms::default(),
            heading_terms: HeadingTerms::default(),
            transitions: Vec::new(),
            arrived: None,
        };
        if !self.armed {
            self.reset_loops();
            return out;
        }
        let scale = self.config.proximity.speed_scale(sectors);
        out.speed_scale = scale;
        let limits = MixerLimits {
            max_thrust_per_side: self.actuators.max_thrust_per_side(),
            steering_priority: self.config.steering_priority,
        };
        match (self.mode, self.setpoint) {
            (ControlMode::Manual, Some(Setpoint::Manual { left, right })) => {
                out.pwm = PwmPair {
                    left: self.actuators.thruster.pwm(left),
                    right: self.actuators.thruster.pwm(right),
                };
                let max = limits.max_thrust_per_side;
                out.t_left = left.clamp(-1.0, 1.0) * max;
                out.t_right = right.clamp(-1.0, 1.0) * max;
                out.t_forward = (out.t_left + out.t_right) / 2.0;
                out.t_yaw = (out.t_right - out.t_left) / 2.0;
                return out;
            }
            (ControlMode::GuidedVelocityHeading, Some(Setpoint::VelHead { speed, heading })) => {
                self.guided(speed * scale, heading, 0.0, meas, dt, &mut out);
            }
            (ControlMode::GuidedPosition | ControlMode::ReturnToLaunch, Some(Setpoint::Waypoint { x, y, accept_radius })) => {
                let dist = libm::hypot(x - meas.x, y - meas.y);
                if dist <= accept_radius {
                    out.arrived = Some((x, y));
                    let anchor = Setpoint::LoiterAnchor {
                        x,
                        y,
                        radius: self.config.loiter.radius,
                    };
                    self.switch(ControlMode::Loiter, Some(anchor), TransitionCause::Arrival);
                    self.hold_heading = Some(meas.psi);
                    out.mode = self.mode;
                    out.setpoint = self.setpoint;
                    return self.tick_loiter(x, y, self.config.loiter.radius, meas, scale, dt, &limits, out);
                }
                let g = l1_heading(meas, x, y, self.config.l1_distance);
                let approach = (self.config.approach_gain * dist).max(self.config.min_approach_speed);
                let speed = self.cruise_speed.min(approach);
                let speed = Self::heading_gate(speed, g.heading, meas.psi) * scale;
                self.guided(speed, g.heading, g.rate_ff, meas, dt, &mut out);
            }
            (ControlMode::Loiter, Some(Setpoint::LoiterAnchor { x, y, radius })) => {
                return self.tick_loiter(x, y, radius, meas, scale, dt, &limits, out);
            }
            _ => {
                // Hold, or a guided mode still waiting for its setpoint
                self.reset_loops();
                return out;
            }
        }
        self.finish(out, &limits)
    }

    #[allow(clippy::too_many_arguments)]
    fn tick_loiter(
        &mut self,
        x: f64,
        y: f64,
        radius: f64,
        meas: &Measurement,
        scale: f64,
        dt: f64,
        limits: &MixerLimits,
        mut out: ControlOutput,
    ) -> ControlOutput {
        let hold = *self.hold_heading.get_or_insert(meas.psi);
        let (speed, heading) = loiter_step(x, y, radius, meas, hold, &self.config.loiter);
        if speed > 0.0 {
            self.hold_heading = Some(heading);
        }
        let speed = Self::heading_gate(speed, heading, meas.psi) * scale;
        self.guided(speed, heading, 0.0, meas, dt, &mut out);
        self.finish(out, limits)
    }

    fn finish(&self, mut out: ControlOutput, limits: &MixerLimits) -> ControlOutput {
        let (l, r) = mix(out.t_forward, out.t_yaw, limits);
        out.t_left = l;
        out.t_right = r;
        out.pwm = PwmPair {
            left: self.actuators.pwm_for(l),
            right: self.actuators.pwm_for(r),
        };
        out
    }
}

impl Autopilot for Controller {
    fn apply(&mut self, command: Command, meas: &Measurement) -> Result<(), ControlError> {
        match command {
            Command::Arm { armed: true } => {
                if !meas.x.is_finite() || !meas.y.is_finite() {
                    return Err(ControlError::ArmRefused);
                }
                self.armed = true;
            }
            Command::Arm { armed: false } => {
                self.armed = false;
                self.reset_loops();
            }
            Command::SetMode { mode } => {
                self.check_failsafe()?;
                let sp = self.default_setpoint(mode, meas);
                self.switch(mode, sp, TransitionCause::Command);
                if mode == ControlMode::Loiter {
                    self.hold_heading = Some(meas.psi);
                }
            }
            Command::SetSetpoint { setpoint } => {
                self.check_failsafe()?;
                setpoint.validate()?;
                if !setpoint.matches(self.mode) {
                    return Err(ControlError::ModeMismatch {
                        mode: self.mode,
                        setpoint: setpoint.kind(),
                    });
                }
                self.setpoint = Some(setpoint);
            }
            Command::Engage { mode, setpoint } => {
                self.check_failsafe()?;
                setpoint.validate()?;
                if !setpoint.matches(mode) {
                    return Err(ControlError::ModeMismatch {
                        mode,
                        setpoint: setpoint.kind(),
                    });
                }
                self.switch(mode, Some(setpoint), TransitionCause::Command);
                if mode == ControlMode::Loiter {
                    self.hold_heading = Some(meas.psi);
                }
            }
            Command::SetCruiseSpeed { speed } => {
                if !(speed > 0.0 && speed.is_finite()) {
                    return Err(ControlError::InvalidSetpoint { field: "speed", value: speed });
                }
                self.cruise_speed = speed;
            }
        }
        Ok(())
    }

    fn tick(&mut self, meas: &Measurement, sectors: &SectorArray, health: &Health, dt: f64) -> ControlOutput {
        let mut out = self.tick_inner(meas, sectors, health, dt);
        out.transitions = self.take_transitions();
        out
    }

    fn mode(&self) -> ControlMode {
        self.mode
    }

    fn armed(&self) -> bool {
        self.armed
    }
}

impl Controller {
    /// Arms only with a valid position fix.
    pub fn arm_with_fix(&mut self, position_fix: bool, meas: &Measurement) -> Result<(), ControlError> {
        if !position_fix {
            return Err(ControlError::ArmRefused);
        }
        self.apply(Command::Arm { armed: true }, meas)
    }
}
