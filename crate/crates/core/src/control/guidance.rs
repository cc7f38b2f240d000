//! Waypoint guidance, station keeping and fail-safes.

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::angle::{bearing, wrap_180, wrap_360, wrap_error};
use crate::dynamics::Measurement;

use super::ControlMode;

/// Below this ground speed the course is meaningless and guidance falls
/// back to pure bearing pursuit.
pub const MIN_GUIDANCE_SPEED: f64 = 0.1;
/// Ground speed at which crab compensation reaches full weight.
const CRAB_FULL_SPEED: f64 = 0.5;
const CRAB_LIMIT_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct L1Output {
    /// Heading setpoint, deg.
    pub heading: f64,
    /// Turn-rate feedforward, deg/s clockwise.
    pub rate_ff: f64,
    /// Signed angle from the ground velocity to the line of sight, deg.
    pub eta: f64,
    /// Lateral acceleration demand, m/s^2.
    pub lateral_accel: f64,
    pub distance: f64,
}

/// Nonlinear L1 pursuit of a point.
///
/// `a = 2 V^2 sin(eta) / L1` and the matching turn rate `a / V`, evaluated as
/// `2 V sin(eta) / L1` so it vanishes smoothly with speed. The heading
/// setpoint is the line-of-sight bearing corrected for the current drift
/// angle (course minus heading), faded in between 0.1 and 0.5 m/s.
pub fn l1_heading(meas: &Measurement, target_x: f64, target_y: f64, l1_distance: f64) -> L1Output {
    let dx = target_x - meas.x;
    let dy = target_y - meas.y;
    let distance = libm::hypot(dx, dy);
    let los = bearing(dx, dy);
    let speed = meas.speed.max(0.0);
    if speed <= MIN_GUIDANCE_SPEED {
        return L1Output {
            heading: los,
            rate_ff: 0.0,
            eta: 0.0,
            lateral_accel: 0.0,
            distance,
        };
    }
    let eta = wrap_error(los, meas.course);
    let s = libm::sin(eta.to_radians());
    let lateral_accel = 2.0 * speed * speed * s / l1_distance;
    let rate_ff = (2.0 * speed * s / l1_distance).to_degrees();
    let weight = ((speed - MIN_GUIDANCE_SPEED) / (CRAB_FULL_SPEED - MIN_GUIDANCE_SPEED)).clamp(0.0, 1.0);
    let crab = wrap_180(meas.course - meas.psi).clamp(-CRAB_LIMIT_DEG, CRAB_LIMIT_DEG);
    L1Output {
        heading: wrap_360(los - weight * crab),
        rate_ff,
        eta,
        lateral_accel,
        distance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct LoiterParams {
    /// Radius around the anchor inside which no correction is applied, m.
    pub radius: f64,
    /// Creep speed per meter outside the hold radius, 1/s.
    pub creep_gain: f64,
    /// m/s
    pub max_creep: f64,
}

impl Default for LoiterParams {
    fn default() -> Self {
        Self {
            radius: 1.0,
            creep_gain: 0.6,
            max_creep: 1.0,
        }
    }
}

/// Station keeping around an anchor: drive toward it at a creep speed
/// proportional to the excess distance when outside `radius`, otherwise stop
/// and hold `hold_heading`. Returns `(speed, heading)`.
pub fn loiter_step(
    anchor_x: f64,
    anchor_y: f64,
    radius: f64,
    meas: &Measurement,
    hold_heading: f64,
    params: &LoiterParams,
) -> (f64, f64) {
    let dx = anchor_x - meas.x;
    let dy = anchor_y - meas.y;
    let d = libm::hypot(dx, dy);
    if d <= radius {
        return (0.0, hold_heading);
    }
    let speed = (params.creep_gain * (d - radius)).min(params.max_creep);
    (speed, bearing(dx, dy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct FailsafeConfig {
    /// s without a command link before holding
    pub link_timeout: f64,
    /// remaining battery fraction that triggers return to launch
    pub low_battery: f64,
}

impl Default for FailsafeConfig {
    fn default() -> Self {
        Self {
            link_timeout: 5.0,
            low_battery: 0.2,
        }
    }
}

/// Mode forced by the fail-safes, if any. Low battery outranks link loss.
pub fn failsafe_step(link_age: f64, battery_fraction: f64, cfg: &FailsafeConfig) -> Option<ControlMode> {
    if battery_fraction < cfg.low_battery {
        Some(ControlMode::ReturnToLaunch)
    } else if link_age > cfg.link_timeout {
        Some(ControlMode::Hold)
    } else {
        None
    }
}
