//! Hull resistance and thrust sizing.
//!
//! Total resistance is split into a viscous part (flat-plate friction line
//! corrected by a form factor) and a wave-making part from a regression model
//! driven by the Froude number and three hull-fullness coefficients. Air
//! resistance is not modeled and is always reported as zero.
//!
//! Every intermediate coefficient can be replaced through
//! [`CoefficientOverrides`], which is how reference coefficient tables are
//! reproduced when they do not follow from the raw geometry.

use alloc::vec::Vec;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Below this Froude number wave making is negligible (used only when the
/// low-Froude cutoff is switched on).
pub const LOW_FROUDE_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HydroError {
    #[error("invalid hull geometry: {field} = {value} ({reason})")]
    InvalidGeometry {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid fluid property: {field} = {value}")]
    InvalidFluid { field: &'static str, value: f64 },
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("{what} out of range: {value}")]
    Range { what: &'static str, value: f64 },
}

/// Principal hull dimensions. Waterline variants of length, beam and draft
/// are represented by a single quantity each.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct HullGeometry {
    /// Length, m.
    pub length: f64,
    /// Beam, m.
    pub beam: f64,
    /// Draft, m.
    pub draft: f64,
    /// Displaced volume, m^3.
    pub displaced_volume: f64,
    /// Submerged midsection area, m^2.
    pub midsection_area: f64,
    /// Waterplane area, m^2.
    pub waterplane_area: f64,
    /// Loaded mass, kg.
    pub mass: f64,
}

impl HullGeometry {
    pub fn validate(&self) -> Result<(), HydroError> {
        let fields = [
            ("length", self.length),
            ("beam", self.beam),
            ("draft", self.draft),
            ("displaced_volume", self.displaced_volume),
            ("midsection_area", self.midsection_area),
            ("waterplane_area", self.waterplane_area),
            ("mass", self.mass),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(HydroError::InvalidGeometry {
                    field,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        let bound = self.length * self.beam * self.draft;
        if self.displaced_volume > bound {
            return Err(HydroError::InvalidGeometry {
                field: "displaced_volume",
                value: self.displaced_volume,
                reason: "exceeds the length x beam x draft box",
            });
        }
        Ok(())
    }

    /// Sets the mass to the floating-equilibrium value `volume * density`.
    pub fn with_buoyant_mass(mut self, fluid: &FluidProperties) -> Self {
        self.mass = self.displaced_volume * fluid.density;
        self
    }

    pub fn is_buoyancy_consistent(&self, fluid: &FluidProperties, rel_tol: f64) -> bool {
        let m = self.displaced_volume * fluid.density;
        ((self.mass - m) / m).abs() <= rel_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct FluidProperties {
    /// kg/m^3
    pub density: f64,
    /// m^2/s
    pub kinematic_viscosity: f64,
    /// m/s^2
    pub gravity: f64,
}

impl Default for FluidProperties {
    /// Fresh water at about 20 C.
    fn default() -> Self {
        Self {
            density: 1000.0,
            kinematic_viscosity: 1.002e-6,
            gravity: 9.81,
        }
    }
}

impl FluidProperties {
    pub fn validate(&self) -> Result<(), HydroError> {
        for (field, value) in [
            ("density", self.density),
            ("kinematic_viscosity", self.kinematic_viscosity),
            ("gravity", self.gravity),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(HydroError::InvalidFluid { field, value });
            }
        }
        Ok(())
    }
}

/// Optional replacements for computed coefficients.
///
/// A supplied value replaces the computed one and is echoed into the
/// resulting [`DragBreakdown`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct CoefficientOverrides {
    pub friction: Option<f64>,
    pub form_factor: Option<f64>,
    pub wetted_area: Option<f64>,
    pub prismatic: Option<f64>,
    pub midship: Option<f64>,
    pub waterplane: Option<f64>,
    /// Multiplier on the raw wave drag.
    pub wave_scale: f64,
    /// Report zero wave drag below Fn = 0.3.
    pub low_froude_cutoff: bool,
}

impl Default for CoefficientOverrides {
    fn default() -> Self {
        Self {
            friction: None,
            form_factor: None,
            wetted_area: None,
            prismatic: None,
            midship: None,
            waterplane: None,
            wave_scale: 1.0,
            low_froude_cutoff: false,
        }
    }
}

/// Wave-drag multiplier that makes the table coefficients reproduce a wave
/// drag of 86.18 N at 3.6 m/s on the 1.7 m twin hull.
pub const TABLE_WAVE_SCALE: f64 = 0.004_197_974_8;

impl CoefficientOverrides {
    /// Form factor, wetted area and form coefficients from the published
    /// drag table for the 1.7 m twin hull, friction from the ITTC line, and
    /// the wave drag scaled by [`TABLE_WAVE_SCALE`].
    pub fn table_calibrated() -> Self {
        Self {
            friction: None,
            form_factor: Some(0.9),
            wetted_area: Some(3.32),
            prismatic: Some(0.17),
            midship: Some(0.52),
            waterplane: Some(0.7902),
            wave_scale: TABLE_WAVE_SCALE,
            low_froude_cutoff: false,
        }
    }

    pub fn validate(&self) -> Result<(), HydroError> {
        let opts = [
            ("friction", self.friction),
            ("form_factor", self.form_factor),
            ("wetted_area", self.wetted_area),
            ("prismatic", self.prismatic),
            ("midship", self.midship),
            ("waterplane", self.waterplane),
        ];
        for (what, v) in opts {
            if let Some(value) = v {
                if !(value.is_finite() && value > 0.0) {
                    return Err(HydroError::Range { what, value });
                }
            }
        }
        if !(self.wave_scale.is_finite() && self.wave_scale >= 0.0) {
            return Err(HydroError::Range {
                what: "wave_scale",
                value: self.wave_scale,
            });
        }
        Ok(())
    }
}

/// Every intermediate of the resistance chain at one speed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DragBreakdown {
    pub speed: f64,
    pub reynolds: f64,
    pub froude: f64,
    pub friction: f64,
    pub form_factor: f64,
    pub wetted_area: f64,
    pub prismatic: f64,
    pub midship: f64,
    pub waterplane: f64,
    pub wave_c: f64,
    pub wave_m1: f64,
    pub wave_m2: f64,
    pub wave_lambda: f64,
    pub viscous: f64,
    pub wave: f64,
    pub air: f64,
    pub total: f64,
    /// Set when a fullness coefficient falls outside `(0, 1]`.
    pub coefficient_warning: bool,
}

/// `2 (LB + BD + LD)`, m^2.
pub fn wetted_surface(geom: &HullGeometry) -> f64 {
    let (l, b, d) = (geom.length, geom.beam, geom.draft);
    2.0 * (l * b + b * d + l * d)
}

pub fn reynolds_number(length: f64, speed: f64, nu: f64) -> f64 {
    length * speed / nu
}

/// ITTC-57 style friction line `0.075 / (log10 Rn - 2)^2`.
pub fn friction_coefficient(reynolds: f64) -> Result<f64, HydroError> {
    if !(reynolds > 100.0) || !reynolds.is_finite() {
        return Err(HydroError::Domain {
            what: "reynolds number",
            value: reynolds,
        });
    }
    let x = libm::log10(reynolds) - 2.0;
    Ok(0.075 / (x * x))
}

/// `19 (volume / (L^2 D))^2`.
pub fn form_factor(geom: &HullGeometry) -> f64 {
    let ratio = geom.displaced_volume / (geom.length * geom.length * geom.draft);
    19.0 * ratio * ratio
}

pub fn froude_number(speed: f64, length: f64, gravity: f64) -> f64 {
    speed / libm::sqrt(gravity * length)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormCoefficients {
    pub prismatic: f64,
    pub midship: f64,
    pub waterplane: f64,
    /// Any coefficient outside `(0, 1]`. Physically suspect, still usable.
    pub suspect: bool,
}

pub fn form_coefficients(geom: &HullGeometry) -> FormCoefficients {
    let prismatic = geom.displaced_volume / (geom.midsection_area * geom.length);
    let midship = geom.midsection_area / (geom.beam * geom.draft);
    let waterplane = geom.waterplane_area / (geom.length * geom.beam);
    let out = |c: f64| !(c > 0.0 && c <= 1.0);
    FormCoefficients {
        prismatic,
        midship,
        waterplane,
        suspect: out(prismatic) || out(midship) || out(waterplane),
    }
}

/// Inputs of the wave-making regression, already reduced to dimensionless
/// form plus the displacement force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveInputs {
    pub prismatic: f64,
    pub midship: f64,
    pub waterplane: f64,
    pub beam_over_length: f64,
    pub length_over_beam: f64,
    pub froude: f64,
    /// Displacement as a force, `volume * rho * g`, N.
    pub displacement_force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveTerms {
    pub c: f64,
    pub m1: f64,
    pub m2: f64,
    pub lambda: f64,
    pub exponent: f64,
    /// Unscaled wave drag, N.
    pub raw: f64,
}

/// Evaluates the wave-drag regression
/// `R_w = disp * c * exp(m1 Fn^-0.9 + m2 cos(lambda Fn^-2))`.
pub fn wave_terms(inp: &WaveInputs) -> Result<WaveTerms, HydroError> {
    if !(inp.froude > 0.0) || !inp.froude.is_finite() {
        return Err(HydroError::Domain {
            what: "froude number",
            value: inp.froude,
        });
    }
    let bl = inp.beam_over_length;
    let cp = inp.prismatic;
    let c = 569.0
        * libm::pow(bl, 2.984)
        * libm::pow(inp.midship, -0.7439)
        * libm::pow(inp.waterplane, 1.2655);
    let m1 = -4.8507 * bl + 8.1768 * cp + 14.034 * cp * cp - 7.0682 * cp * cp * cp;
    let inv_fn2 = 1.0 / (inp.froude * inp.froude);
    let m2 = -0.4468 * libm::exp(-0.1 * inv_fn2);
    let lambda = 1.446 * cp - 0.03 * inp.length_over_beam;
    // m2 underflows to zero long before cos() of a huge argument loses meaning
    let oscillation = if m2 == 0.0 {
        0.0
    } else {
        m2 * libm::cos(lambda * inv_fn2)
    };
    let exponent = m1 * libm::pow(inp.froude, -0.9) + oscillation;
    let raw = inp.displacement_force * c * libm::exp(exponent);
    Ok(WaveTerms {
        c,
        m1,
        m2,
        lambda,
        exponent,
        raw,
    })
}

/// Wave scale that makes `inp` reproduce `target_force` newtons.
pub fn calibrate_wave_scale(inp: &WaveInputs, target_force: f64) -> Result<f64, HydroError> {
    let terms = wave_terms(inp)?;
    if !(terms.raw > 0.0) || !(target_force >= 0.0) {
        return Err(HydroError::Range {
            what: "wave calibration target",
            value: target_force,
        });
    }
    Ok(target_force / terms.raw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscousDrag {
    pub reynolds: f64,
    pub friction: f64,
    pub form_factor: f64,
    pub wetted_area: f64,
    pub force: f64,
}

/// `0.5 rho V^2 C_F (1 + K) S_wet`.
pub fn viscous_drag(
    geom: &HullGeometry,
    fluid: &FluidProperties,
    speed: f64,
    ov: &CoefficientOverrides,
) -> Result<ViscousDrag, HydroError> {
    check_speed(speed)?;
    if speed == 0.0 {
        return Ok(ViscousDrag {
            reynolds: 0.0,
            friction: 0.0,
            form_factor: 0.0,
            wetted_area: 0.0,
            force: 0.0,
        });
    }
    let reynolds = reynolds_number(geom.length, speed, fluid.kinematic_viscosity);
    let friction = match ov.friction {
        Some(cf) => cf,
        None => friction_coefficient(reynolds)?,
    };
    let form_factor = ov.form_factor.unwrap_or_else(|| form_factor(geom));
    let wetted_area = ov.wetted_area.unwrap_or_else(|| wetted_surface(geom));
    let force = 0.5 * fluid.density * speed * speed * friction * (1.0 + form_factor) * wetted_area;
    Ok(ViscousDrag {
        reynolds,
        friction,
        form_factor,
        wetted_area,
        force,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveDrag {
    pub froude: f64,
    pub coefficients: FormCoefficients,
    pub terms: WaveTerms,
    /// Scaled (and possibly cut off) wave drag, N.
    pub force: f64,
}

pub fn wave_drag(
    geom: &HullGeometry,
    fluid: &FluidProperties,
    speed: f64,
    ov: &CoefficientOverrides,
) -> Result<WaveDrag, HydroError> {
    if !(speed > 0.0) || !speed.is_finite() {
        return Err(HydroError::Domain {
            what: "speed",
            value: speed,
        });
    }
    let froude = froude_number(speed, geom.length, fluid.gravity);
    let computed = form_coefficients(geom);
    let prismatic = ov.prismatic.unwrap_or(computed.prismatic);
    let midship = ov.midship.unwrap_or(computed.midship);
    let waterplane = ov.waterplane.unwrap_or(computed.waterplane);
    let out = |c: f64| !(c > 0.0 && c <= 1.0);
    let coefficients = FormCoefficients {
        prismatic,
        midship,
        waterplane,
        suspect: out(prismatic) || out(midship) || out(waterplane),
    };
    let terms = wave_terms(&WaveInputs {
        prismatic,
        midship,
        waterplane,
        beam_over_length: geom.beam / geom.length,
        length_over_beam: geom.length / geom.beam,
        froude,
        displacement_force: geom.displaced_volume * fluid.density * fluid.gravity,
    })?;
    // a zero scale disables the term even where the regression overflows
    let force = if ov.wave_scale == 0.0 || (ov.low_froude_cutoff && froude < LOW_FROUDE_LIMIT) {
        0.0
    } else {
        ov.wave_scale * terms.raw
    };
    Ok(WaveDrag {
        froude,
        coefficients,
        terms,
        force,
    })
}

/// Full resistance breakdown at one speed. Zero speed yields an all-zero
/// breakdown without touching the friction line.
pub fn total_drag(
    geom: &HullGeometry,
    fluid: &FluidProperties,
    speed: f64,
    ov: &CoefficientOverrides,
) -> Result<DragBreakdown, HydroError> {
    check_speed(speed)?;
    if speed == 0.0 {
        return Ok(DragBreakdown::default());
    }
    let v = viscous_drag(geom, fluid, speed, ov)?;
    let w = wave_drag(geom, fluid, speed, ov)?;
    let air = 0.0;
    Ok(DragBreakdown {
        speed,
        reynolds: v.reynolds,
        froude: w.froude,
        friction: v.friction,
        form_factor: v.form_factor,
        wetted_area: v.wetted_area,
        prismatic: w.coefficients.prismatic,
        midship: w.coefficients.midship,
        waterplane: w.coefficients.waterplane,
        wave_c: w.terms.c,
        wave_m1: w.terms.m1,
        wave_m2: w.terms.m2,
        wave_lambda: w.terms.lambda,
        viscous: v.force,
        wave: w.force,
        air,
        total: v.force + w.force + air,
        coefficient_warning: w.coefficients.suspect,
    })
}

/// Uniformly sampled resistance curve from `v_min` to `v_max` inclusive.
pub fn drag_curve(
    geom: &HullGeometry,
    fluid: &FluidProperties,
    v_min: f64,
    v_max: f64,
    steps: usize,
    ov: &CoefficientOverrides,
) -> Result<Vec<DragBreakdown>, HydroError> {
    if !(v_min >= 0.0) || !(v_max > v_min) || !v_max.is_finite() {
        return Err(HydroError::Range {
            what: "speed interval",
            value: v_max - v_min,
        });
    }
    if steps < 2 {
        return Err(HydroError::Range {
            what: "steps",
            value: steps as f64,
        });
    }
    let last = steps - 1;
    (0..steps)
        .map(|i| {
            let v = if i == last {
                v_max
            } else {
                v_min + (v_max - v_min) * i as f64 / last as f64
            };
            total_drag(geom, fluid, v, ov)
        })
        .collect()
}

/// A hull bundled with its fluid and coefficient overrides, evaluated as a
/// speed -> resistance function.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DragModel {
    pub geometry: HullGeometry,
    pub fluid: FluidProperties,
    pub overrides: CoefficientOverrides,
}

impl DragModel {
    pub fn validate(&self) -> Result<(), HydroError> {
        self.geometry.validate()?;
        self.fluid.validate()?;
        self.overrides.validate()
    }

    pub fn breakdown(&self, speed: f64) -> Result<DragBreakdown, HydroError> {
        total_drag(&self.geometry, &self.fluid, speed, &self.overrides)
    }

    /// Total resistance in newtons for a non-negative speed.
    ///
    /// Speeds so low that the friction line is undefined (Rn <= 100) are
    /// treated as zero resistance.
    pub fn resistance(&self, speed: f64) -> f64 {
        let speed = speed.abs();
        match self.breakdown(speed) {
            Ok(b) => b.total,
            Err(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ThrustPlan {
    pub active_thrust: f64,
    pub moving_efficiency: f64,
    pub nominal_thrust: f64,
    pub safety_factor: f64,
    pub final_thrust: f64,
    pub unit_static_thrust: f64,
    pub thruster_count: u32,
}

/// Sizes the propulsion for a steady-speed resistance `total_resistance`.
///
/// At constant speed the active thrust equals the resistance; the nominal
/// thrust divides out the moving efficiency and the final thrust adds the
/// safety factor.
pub fn thrust_plan(
    total_resistance: f64,
    moving_efficiency: f64,
    safety_factor: f64,
    unit_static_thrust: f64,
) -> Result<ThrustPlan, HydroError> {
    if !(moving_efficiency > 0.0 && moving_efficiency <= 1.0) {
        return Err(HydroError::Range {
            what: "moving efficiency",
            value: moving_efficiency,
        });
    }
    if !(safety_factor >= 1.0) || !safety_factor.is_finite() {
        return Err(HydroError::Range {
            what: "safety factor",
            value: safety_factor,
        });
    }
    if !(unit_static_thrust > 0.0) || !unit_static_thrust.is_finite() {
        return Err(HydroError::Range {
            what: "unit static thrust",
            value: unit_static_thrust,
        });
    }
    if !(total_resistance >= 0.0) || !total_resistance.is_finite() {
        return Err(HydroError::Range {
            what: "total resistance",
            value: total_resistance,
        });
    }
    let active_thrust = total_resistance;
    let nominal_thrust = active_thrust / moving_efficiency;
    let final_thrust = safety_factor * nominal_thrust;
    let thruster_count = libm::ceil(final_thrust / unit_static_thrust).max(1.0) as u32;
    Ok(ThrustPlan {
        active_thrust,
        moving_efficiency,
        nominal_thrust,
        safety_factor,
        final_thrust,
        unit_static_thrust,
        thruster_count,
    })
}

fn check_speed(speed: f64) -> Result<(), HydroError> {
    if !(speed >= 0.0) || !speed.is_finite() {
        return Err(HydroError::Domain {
            what: "speed",
            value: speed,
        });
    }
    Ok(())
}
