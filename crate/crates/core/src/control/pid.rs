#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Parallel-form PID gains and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the accumulated integral term, output units.
    pub integral_limit: f64,
    /// Symmetric bound on the output.
    pub output_limit: f64,
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64, integral_limit: f64, output_limit: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integral_limit,
            output_limit,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.kp, self.ki, self.kd].iter().all(|g| *g >= 0.0 && g.is_finite())
            && self.integral_limit > 0.0
            && self.output_limit > 0.0
    }
}

/// PID with derivative on measurement, clamped integral, and conditional
/// integration while the output is saturated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    lo: f64,
    hi: f64,
    integral: f64,
    last_measurement: Option<f64>,
}

/// Individual terms of the last update, for telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PidTerms {
    pub p: f64,
    pub i: f64,
    pub d: f64,
    pub output: f64,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            lo: -gains.output_limit,
            hi: gains.output_limit,
            integral: 0.0,
            last_measurement: None,
        }
    }

    /// Narrows the output range to `[lo, hi]` within the symmetric limit.
    pub fn with_output_range(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo.max(-self.gains.output_limit);
        self.hi = hi.min(self.gains.output_limit);
        self
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.last_measurement = None;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Update with the derivative taken from successive measurements.
    pub fn update(&mut self, error: f64, measurement: f64, dt: f64) -> PidTerms {
        self.update_biased(error, measurement, dt, 0.0)
    }

    /// Like [`Pid::update`] with a feedforward `bias` added to the output
    /// before the range clamp, so anti-windup sees the combined command.
    pub fn update_biased(&mut self, error: f64, measurement: f64, dt: f64, bias: f64) -> PidTerms {
        let rate = match self.last_measurement {
            Some(prev) if dt > 0.0 => (measurement - prev) / dt,
            _ => 0.0,
        };
        self.last_measurement = Some(measurement);
        self.step(error, rate, dt, bias)
    }

    /// Update with an externally measured rate of the controlled variable.
    pub fn update_with_rate(&mut self, error: f64, measurement_rate: f64, dt: f64) -> PidTerms {
        self.step(error, measurement_rate, dt, 0.0)
    }

    fn step(&mut self, error: f64, measurement_rate: f64, dt: f64, bias: f64) -> PidTerms {
        let g = self.gains;
        let p = g.kp * error;
        let d = -g.kd * measurement_rate;
        let candidate = (self.integral + g.ki * error * dt).clamp(-g.integral_limit, g.integral_limit);
        let unclamped = p + candidate + d + bias;
        // hold the integrator when it would push further into saturation
        let winding = (unclamped > self.hi && error > 0.0) || (unclamped < self.lo && error < 0.0);
        if !winding {
            self.integral = candidate;
        }
        let output = (p + self.integral + d + bias).clamp(self.lo, self.hi);
        PidTerms {
            p,
            i: self.integral,
            d,
            output,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gains_output_zero() {
        let mut pid = Pid::new(PidGains::new(0.0, 0.0, 0.0, 10.0, 10.0));
        for k in 0..100 {
            let e = libm::sin(k as f64 * 0.37) * 50.0;
            assert_eq!(pid.update(e, -e, 0.1).output, 0.0);
        }
    }

    #[test]
    fn proportional_only() {
        let mut pid = Pid::new(PidGains::new(2.0, 0.0, 0.0, 10.0, 100.0));
        assert_eq!(pid.update(3.0, 0.0, 0.1).output, 6.0);
        assert_eq!(pid.update(-60.0, 0.0, 0.1).output, -100.0);
    }

    #[test]
    fn integral_is_clamped() {
        let mut pid = Pid::new(PidGains::new(0.0, 1.0, 0.0, 5.0, 100.0));
        for _ in 0..1000 {
            pid.update(10.0, 0.0, 0.1);
        }
        assert_eq!(pid.integral(), 5.0);
    }

    #[test]
    fn no_windup_in_saturation() {
        let mut pid = Pid::new(PidGains::new(10.0, 1.0, 0.0, 1000.0, 20.0));
        for _ in 0..100 {
            pid.update(5.0, 0.0, 0.1);
        }
        assert_eq!(pid.integral(), 0.0);
    }

    #[test]
    fn derivative_on_measurement() {
        let mut pid = Pid::new(PidGains::new(0.0, 0.0, 1.0, 1.0, 100.0));
        assert_eq!(pid.update(0.0, 0.0, 0.1).output, 0.0);
        let out = pid.update(0.0, 1.0, 0.1).output;
        assert!((out + 10.0).abs() < 1e-12);
    }

    #[test]
    fn output_range() {
        let mut pid = Pid::new(PidGains::new(1.0, 0.0, 0.0, 1.0, 100.0)).with_output_range(0.0, 50.0);
        assert_eq!(pid.update(-5.0, 0.0, 0.1).output, 0.0);
        assert_eq!(pid.update(500.0, 0.0, 0.1).output, 50.0);
    }
}
