//! Planar 3-DOF model of an underactuated differential-thrust vessel.
//!
//! The state carries ground-referenced body velocities. Hydrodynamic forces
//! act on the water-relative velocities, so a uniform current advects the
//! hull through damping rather than through the kinematics. Surge
//! resistance reuses the hull resistance chain from [`crate::hydrostatics`]
//! plus a linear calibration term.
//!
//! Integration is classical fixed-step RK4. Commanded thrust passes through
//! a first-order lag and a linear thrust-vs-advance-speed derating before it
//! reaches the hull.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::angle::{bearing, wrap_360};
use crate::hydrostatics::DragModel;

/// Largest accepted physics step, s.
pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("pwm {pwm} us outside [{min}, {max}]")]
    PwmRange { pwm: f64, min: f64, max: f64 },
    #[error("time step {0} s outside (0, 0.1]")]
    TimeStep(f64),
    #[error("invalid parameter {field} = {value}")]
    Parameter { field: &'static str, value: f64 },
    #[error("no equilibrium: net thrust at rest is {0} N")]
    NoEquilibrium(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VesselState {
    /// s
    pub t: f64,
    /// m east of origin
    pub x: f64,
    /// m north of origin
    pub y: f64,
    /// heading, compass degrees in [0, 360)
    pub psi: f64,
    /// surge, m/s
    pub u: f64,
    /// sway (starboard positive), m/s
    pub v: f64,
    /// yaw rate, deg/s clockwise positive
    pub r: f64,
}

impl VesselState {
    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_360(psi),
            ..Self::default()
        }
    }

    /// Ground velocity `(east, north)`, m/s.
    pub fn ground_velocity(&self) -> (f64, f64) {
        body_to_world(self.psi, self.u, self.v)
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.y, self.psi, self.u, self.v, self.r]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Rotates a body-frame (forward, starboard) vector into (east, north).
pub fn body_to_world(psi_deg: f64, fwd: f64, stbd: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(psi_deg.to_radians());
    (fwd * s + stbd * c, fwd * c - stbd * s)
}

/// Rotates an (east, north) vector into body-frame (forward, starboard).
pub fn world_to_body(psi_deg: f64, east: f64, north: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(psi_deg.to_radians());
    (east * s + north * c, east * c - north * s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ThrusterModel {
    /// Bollard thrust at full command, N.
    pub max_static_thrust: f64,
    /// Advance speed at which the moving efficiency is reached, m/s.
    pub rated_speed: f64,
    pub moving_efficiency: f64,
    /// Lateral distance between the port and starboard thrust lines, m.
    pub separation: f64,
    pub pwm_neutral: f64,
    pub pwm_min: f64,
    pub pwm_max: f64,
    /// Half-width of the dead zone around neutral, us.
    pub deadband: f64,
    /// First-order response time constant, s.
    pub time_constant: f64,
}

impl Default for ThrusterModel {
    fn default() -> Self {
        Self {
            max_static_thrust: 161.0,
            rated_speed: 3.6,
            moving_efficiency: 0.5,
            separation: 0.5,
            pwm_neutral: 1500.0,
            pwm_min: 1100.0,
            pwm_max: 1900.0,
            deadband: 30.0,
            time_constant: 0.2,
        }
    }
}

impl ThrusterModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("max_static_thrust", self.max_static_thrust),
            ("rated_speed", self.rated_speed),
            ("separation", self.separation),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DynamicsError::Parameter { field, value });
            }
        }
        if !(self.moving_efficiency > 0.0 && self.moving_efficiency <= 1.0) {
            return Err(DynamicsError::Parameter {
                field: "moving_efficiency",
                value: self.moving_efficiency,
            });
        }
        if !(self.pwm_min < self.pwm_neutral && self.pwm_neutral < self.pwm_max) {
            return Err(DynamicsError::Parameter {
                field: "pwm_neutral",
                value: self.pwm_neutral,
            });
        }
        let span = (self.pwm_max - self.pwm_neutral).min(self.pwm_neutral - self.pwm_min);
        if !(self.deadband >= 0.0 && self.deadband < span) {
            return Err(DynamicsError::Parameter {
                field: "deadband",
                value: self.deadband,
            });
        }
        if !(self.time_constant >= 0.0 && self.time_constant.is_finite()) {
            return Err(DynamicsError::Parameter {
                field: "time_constant",
                value: self.time_constant,
            });
        }
        Ok(())
    }

    /// Normalized command in `[-1, 1]` for a pulse width.
    pub fn normalized(&self, pwm: f64) -> Result<f64, DynamicsError> {
        if !(pwm >= self.pwm_min && pwm <= self.pwm_max) {
            return Err(DynamicsError::PwmRange {
                pwm,
                min: self.pwm_min,
                max: self.pwm_max,
            });
        }
        let hi = self.pwm_neutral + self.deadband;
        let lo = self.pwm_neutral - self.deadband;
        Ok(if pwm > hi {
            (pwm - hi) / (self.pwm_max - hi)
        } else if pwm < lo {
            -(lo - pwm) / (lo - self.pwm_min)
        } else {
            0.0
        })
    }

    /// Inverse of [`normalized`](Self::normalized); the input is clamped to
    /// `[-1, 1]` and zero maps to exact neutral.
    pub fn pwm(&self, normalized: f64) -> f64 {
        let n = normalized.clamp(-1.0, 1.0);
        let hi = self.pwm_neutral + self.deadband;
        let lo = self.pwm_neutral - self.deadband;
        if n > 0.0 {
            hi + n * (self.pwm_max - hi)
        } else if n < 0.0 {
            lo + n * (lo - self.pwm_min)
        } else {
            self.pwm_neutral
        }
    }

    /// Fraction of static thrust available at `advance_speed`: one at rest,
    /// falling linearly to the moving efficiency at the rated speed and flat
    /// beyond it.
    pub fn speed_factor(&self, advance_speed: f64) -> f64 {
        let x = advance_speed.abs().min(self.rated_speed) / self.rated_speed;
        1.0 - (1.0 - self.moving_efficiency) * x
    }
}

/// Signed thrust of one thruster at `pwm` while advancing at `advance_speed`.
pub fn thrust_from_pwm(
    pwm: f64,
    model: &ThrusterModel,
    advance_speed: f64,
) -> Result<f64, DynamicsError> {
    let n = model.normalized(pwm)?;
    Ok(n * model.max_static_thrust * model.speed_factor(advance_speed))
}

/// Standard deviations of the virtual navigation sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SensorNoise {
    /// per-axis GNSS position, m
    pub position: f64,
    /// compass, deg
    pub heading: f64,
    /// per-axis ground velocity, m/s
    pub speed: f64,
    /// gyro, deg/s
    pub yaw_rate: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            position: 0.02,
            heading: 0.5,
            speed: 0.02,
            yaw_rate: 0.2,
        }
    }
}

impl SensorNoise {
    pub const NONE: Self = Self {
        position: 0.0,
        heading: 0.0,
        speed: 0.0,
        yaw_rate: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct EnvironmentField {
    /// Uniform water current, m/s.
    pub current_east: f64,
    pub current_north: f64,
    /// Constant wind force on the hull, N.
    pub wind_east: f64,
    pub wind_north: f64,
    pub noise: SensorNoise,
}

impl EnvironmentField {
    pub fn calm() -> Self {
        Self {
            noise: SensorNoise::NONE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let n = &self.noise;
        for (field, value) in [
            ("noise.position", n.position),
            ("noise.heading", n.heading),
            ("noise.speed", n.speed),
            ("noise.yaw_rate", n.yaw_rate),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(DynamicsError::Parameter { field, value });
            }
        }
        for (field, value) in [
            ("current_east", self.current_east),
            ("current_north", self.current_north),
            ("wind_east", self.wind_east),
            ("wind_north", self.wind_north),
        ] {
            if !value.is_finite() {
                return Err(DynamicsError::Parameter { field, value });
            }
        }
        Ok(())
    }
}

/// Rigid-body and damping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct BodyParams {
    /// kg
    pub mass: f64,
    /// kg m^2
    pub yaw_inertia: f64,
    /// Added-mass fractions of the rigid-body value.
    pub added_mass_surge: f64,
    pub added_mass_sway: f64,
    pub added_mass_yaw: f64,
    /// N per m/s
    pub surge_linear: f64,
    /// N per m/s
    pub sway_linear: f64,
    /// N per (m/s)^2
    pub sway_quadratic: f64,
    /// N m per rad/s
    pub yaw_linear: f64,
    /// N m per (rad/s)^2
    pub yaw_quadratic: f64,
}

impl BodyParams {
    /// Defaults for a hull of the given mass and plan dimensions, with the
    /// yaw inertia of a uniform rectangular plate.
    pub fn for_hull(mass: f64, length: f64, beam: f64) -> Self {
        Self {
            mass,
            yaw_inertia: mass * (length * length + beam * beam) / 12.0,
            added_mass_surge: 0.05,
            added_mass_sway: 0.50,
            added_mass_yaw: 0.30,
            surge_linear: 0.0,
            sway_linear: 40.0,
            sway_quadratic: 60.0,
            yaw_linear: 20.0,
            yaw_quadratic: 30.0,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (field, value) in [("mass", self.mass), ("yaw_inertia", self.yaw_inertia)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DynamicsError::Parameter { field, value });
            }
        }
        for (field, value) in [
            ("added_mass_surge", self.added_mass_surge),
            ("added_mass_sway", self.added_mass_sway),
            ("added_mass_yaw", self.added_mass_yaw),
            ("surge_linear", self.surge_linear),
            ("sway_linear", self.sway_linear),
            ("sway_quadratic", self.sway_quadratic),
            ("yaw_linear", self.yaw_linear),
            ("yaw_quadratic", self.yaw_quadratic),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(DynamicsError::Parameter { field, value });
            }
        }
        Ok(())
    }

    fn surge_mass(&self) -> f64 {
        self.mass * (1.0 + self.added_mass_surge)
    }

    fn sway_mass(&self) -> f64 {
        self.mass * (1.0 + self.added_mass_sway)
    }

    fn yaw_mass(&self) -> f64 {
        self.yaw_inertia * (1.0 + self.added_mass_yaw)
    }

    /// Kinetic energy including added mass, J.
    pub fn kinetic_energy(&self, s: &VesselState) -> f64 {
        let r = s.r.to_radians();
        0.5 * (self.surge_mass() * s.u * s.u + self.sway_mass() * s.v * s.v + self.yaw_mass() * r * r)
    }
}

/// Everything that defines the simulated hull and its propulsion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Plant {
    pub body: BodyParams,
    pub thruster: ThrusterModel,
    /// Thrusters ganged on each side, driven by one signal.
    pub thrusters_per_side: u32,
    pub drag: DragModel,
}

impl Plant {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.body.validate()?;
        self.thruster.validate()?;
        if self.thrusters_per_side == 0 {
            return Err(DynamicsError::Parameter {
                field: "thrusters_per_side",
                value: 0.0,
            });
        }
        self.drag.validate().map_err(|_| DynamicsError::Parameter {
            field: "drag",
            value: f64::NAN,
        })
    }

    /// Static thrust limit of one side, N.
    pub fn max_thrust_per_side(&self) -> f64 {
        self.thrusters_per_side as f64 * self.thruster.max_static_thrust
    }
}

/// Time derivative of a [`VesselState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRate {
    pub x: f64,
    pub y: f64,
    /// deg/s
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    /// deg/s^2
    pub r: f64,
}

/// Equations of motion for given effective side thrusts (N).
pub fn derivatives(
    s: &VesselState,
    thrust_left: f64,
    thrust_right: f64,
    env: &EnvironmentField,
    plant: &Plant,
) -> StateRate {
    let body = &plant.body;
    let (cu, cv) = world_to_body(s.psi, env.current_east, env.current_north);
    let (wu, wv) = world_to_body(s.psi, env.wind_east, env.wind_north);
    let ur = s.u - cu;
    let vr = s.v - cv;
    let r = s.r.to_radians();

    let resistance = plant.drag.resistance(ur.abs()) + body.surge_linear * ur.abs();
    let surge_force = thrust_left + thrust_right + wu - signum(ur) * resistance;
    let sway_force = wv - body.sway_linear * vr - body.sway_quadratic * vr * vr.abs();
    let yaw_moment = (thrust_right - thrust_left) * plant.thruster.separation / 2.0
        - body.yaw_linear * r
        - body.yaw_quadratic * r * r.abs();

    let (dx, dy) = body_to_world(s.psi, s.u, s.v);
    StateRate {
        x: dx,
        y: dy,
        psi: s.r,
        u: surge_force / body.surge_mass(),
        v: sway_force / body.sway_mass(),
        r: (yaw_moment / body.yaw_mass()).to_degrees(),
    }
}

fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Pulse widths sent to the two side ESCs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PwmPair {
    pub left: f64,
    pub right: f64,
}

impl PwmPair {
    pub fn neutral(model: &ThrusterModel) -> Self {
        Self {
            left: model.pwm_neutral,
            right: model.pwm_neutral,
        }
    }
}

/// Lagged static thrust actually produced by each side, N.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ActuatorState {
    pub left: f64,
    pub right: f64,
}

fn add(s: &VesselState, k: &StateRate, h: f64) -> VesselState {
    VesselState {
        t: s.t + h,
        x: s.x + h * k.x,
        y: s.y + h * k.y,
        psi: s.psi + h * k.psi,
        u: s.u + h * k.u,
        v: s.v + h * k.v,
        r: s.r + h * k.r,
    }
}

/// Advances the vessel by `dt` seconds.
///
/// The commanded pulse widths are converted to static thrust, passed through
/// the first-order lag in `actuators` and held over the RK4 step; the
/// advance-speed derating is re-evaluated at every stage.
pub fn step(
    state: &VesselState,
    actuators: &mut ActuatorState,
    command: PwmPair,
    env: &EnvironmentField,
    plant: &Plant,
    dt: f64,
) -> Result<VesselState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DynamicsError::TimeStep(dt));
    }
    let th = &plant.thruster;
    let side_max = plant.max_thrust_per_side();
    let target_l = th.normalized(command.left)? * side_max;
    let target_r = th.normalized(command.right)? * side_max;
    let alpha = if th.time_constant > 0.0 {
        1.0 - libm::exp(-dt / th.time_constant)
    } else {
        1.0
    };
    actuators.left += (target_l - actuators.left) * alpha;
    actuators.right += (target_r - actuators.right) * alpha;
    actuators.left = actuators.left.clamp(-side_max, side_max);
    actuators.right = actuators.right.clamp(-side_max, side_max);

    let (tl, tr) = (actuators.left, actuators.right);
    let f = |s: &VesselState| {
        let (cu, _) = world_to_body(s.psi, env.current_east, env.current_north);
        let factor = th.speed_factor(s.u - cu);
        derivatives(s, tl * factor, tr * factor, env, plant)
    };
    let k1 = f(state);
    let k2 = f(&add(state, &k1, dt / 2.0));
    let k3 = f(&add(state, &k2, dt / 2.0));
    let k4 = f(&add(state, &k3, dt));
    let mut next = VesselState {
        t: state.t + dt,
        x: state.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        y: state.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        psi: state.psi + dt / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
        u: state.u + dt / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
        v: state.v + dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
        r: state.r + dt / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
    };
    next.psi = wrap_360(next.psi);
    Ok(next)
}

/// Top speed in calm water with `n_thrusters` at full forward command.
///
/// Bisects `n T_eff(u) - (R_T(u) + d_u u)` to better than 0.01 N; the root
/// is unique because available thrust falls and resistance grows with speed.
pub fn equilibrium_speed(
    n_thrusters: u32,
    thruster: &ThrusterModel,
    drag: &DragModel,
    body: &BodyParams,
) -> Result<f64, DynamicsError> {
    if n_thrusters == 0 {
        return Err(DynamicsError::Parameter {
            field: "n_thrusters",
            value: 0.0,
        });
    }
    let n = n_thrusters as f64;
    let net = |u: f64| {
        n * thruster.max_static_thrust * thruster.speed_factor(u)
            - (drag.resistance(u) + body.surge_linear * u)
    };
    let f0 = net(0.0);
    if f0 <= 0.0 {
        return Err(DynamicsError::NoEquilibrium(f0));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while net(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(DynamicsError::NoEquilibrium(f0));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = net(mid);
        if f.abs() < 1e-3 {
            return Ok(mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One navigation-sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Measurement {
    pub x: f64,
    pub y: f64,
    /// compass heading, deg in [0, 360)
    pub psi: f64,
    /// speed over ground, m/s
    pub speed: f64,
    /// course over ground, deg in [0, 360)
    pub course: f64,
    /// deg/s
    pub yaw_rate: f64,
}

/// Truth plus independent Gaussian noise on every channel. Draws the same
/// number of variates regardless of the configured deviations.
pub fn sensor_sample<R: Rng + ?Sized>(
    state: &VesselState,
    noise: &SensorNoise,
    rng: &mut R,
) -> Measurement {
    let mut gauss = |sigma: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z
    };
    let x = state.x + gauss(noise.position);
    let y = state.y + gauss(noise.position);
    let psi = wrap_360(state.psi + gauss(noise.heading));
    let (ve, vn) = state.ground_velocity();
    let ve = ve + gauss(noise.speed);
    let vn = vn + gauss(noise.speed);
    let yaw_rate = state.r + gauss(noise.yaw_rate);
    Measurement {
        x,
        y,
        psi,
        speed: libm::hypot(ve, vn),
        course: bearing(ve, vn),
        yaw_rate,
    }
}
