//! Coarse linear battery: constant hotel load plus a draw proportional to
//! the static thrust being produced.

use helm_core::dynamics::Plant;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    /// Ah
    pub capacity_ah: f64,
    /// Nominal pack voltage, V.
    pub voltage: f64,
    /// Electronics and sensors, A.
    pub hotel_current: f64,
    /// A per newton of total static thrust.
    pub current_per_newton: f64,
    /// State of charge at launch.
    pub initial_fraction: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            capacity_ah: 66.0,
            voltage: 22.2,
            hotel_current: 2.0,
            current_per_newton: 0.118,
            initial_fraction: 1.0,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<(), (&'static str, &'static str)> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !pos(self.capacity_ah) {
            return Err(("capacity_ah", "must be positive"));
        }
        if !pos(self.voltage) {
            return Err(("voltage", "must be positive"));
        }
        if !nonneg(self.hotel_current) {
            return Err(("hotel_current", "must be non-negative"));
        }
        if !nonneg(self.current_per_newton) {
            return Err(("current_per_newton", "must be non-negative"));
        }
        if !(self.initial_fraction > 0.0 && self.initial_fraction <= 1.0) {
            return Err(("initial_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// A drawn while the sides produce `left` and `right` newtons.
    pub fn current(&self, left: f64, right: f64) -> f64 {
        self.hotel_current + self.current_per_newton * (left.abs() + right.abs())
    }

    /// Hours from full charge holding `speed` in calm water.
    pub fn endurance_hours(&self, plant: &Plant, speed: f64) -> f64 {
        let effective = plant.drag.resistance(speed) + plant.body.surge_linear * speed;
        let static_thrust = effective / plant.thruster.speed_factor(speed);
        self.capacity_ah / self.current(static_thrust / 2.0, static_thrust / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Battery {
    pub config: BatteryConfig,
    used_ah: f64,
}

impl Battery {
    pub fn new(config: BatteryConfig) -> Self {
        Self { config, used_ah: 0.0 }
    }

    pub fn drain(&mut self, current: f64, dt: f64) {
        self.used_ah += current.max(0.0) * dt / 3600.0;
    }

    pub fn used_ah(&self) -> f64 {
        self.used_ah
    }

    pub fn used_wh(&self) -> f64 {
        self.used_ah * self.config.voltage
    }

    /// Remaining state of charge in `[0, 1]`.
    pub fn fraction(&self) -> f64 {
        let c = &self.config;
        ((c.initial_fraction * c.capacity_ah - self.used_ah) / c.capacity_ah).clamp(0.0, 1.0)
    }
}
