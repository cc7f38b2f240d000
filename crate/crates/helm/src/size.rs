//! Propulsion sizing report.

use std::fmt;

use helm_core::dynamics::equilibrium_speed;
use helm_core::hydrostatics::{drag_curve, thrust_plan, DragBreakdown, HydroError, ThrustPlan};
use serde::Serialize;

use crate::config::Config;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSpeed {
    pub thrusters: u32,
    /// m/s
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeReport {
    pub design_speed: f64,
    pub design: DragBreakdown,
    pub curve: Vec<DragBreakdown>,
    pub plan: ThrustPlan,
    pub equilibrium: Vec<EquilibriumSpeed>,
}

#[derive(Debug, thiserror::Error)]
pub enum SizeError {
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error("equilibrium speed: {0}")]
    Dynamics(String),
}

pub fn size_report(config: &Config) -> Result<SizeReport, SizeError> {
    let s = &config.file.sizing;
    let drag = config.drag_model();
    let design = drag.breakdown(s.design_speed)?;
    let curve = drag_curve(&drag.geometry, &drag.fluid, s.curve_min, s.curve_max, s.curve_steps, &drag.overrides)?;
    let unit = s.unit_static_thrust.unwrap_or(config.plant.thruster.max_static_thrust);
    let plan = thrust_plan(design.total, s.moving_efficiency, s.safety_factor, unit)?;
    let equilibrium = [2u32, 4]
        .into_iter()
        .map(|n| {
            equilibrium_speed(n, &config.plant.thruster, &drag, &config.plant.body)
                .map(|speed| EquilibriumSpeed { thrusters: n, speed })
                .map_err(|e| SizeError::Dynamics(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    Ok(SizeReport {
        design_speed: s.design_speed,
        design,
        curve,
        plan,
        equilibrium,
    })
}

impl fmt::Display for SizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.design;
        writeln!(f, "resistance at {:.2} m/s", self.design_speed)?;
        writeln!(f, "  Rn {:.4e}  Fn {:.4}", d.reynolds, d.froude)?;
        writeln!(f, "  Cf {:.6}  1+k {:.4}  S {:.3} m^2", d.friction, d.form_factor, d.wetted_area)?;
        writeln!(f, "  Cp {:.4}  CM {:.4}  CWP {:.4}", d.prismatic, d.midship, d.waterplane)?;
        writeln!(f, "  viscous {:.2} N  wave {:.2} N  air {:.2} N", d.viscous, d.wave, d.air)?;
        writeln!(f, "  total {:.2} N", d.total)?;
        writeln!(f, "drag curve")?;
        for p in &self.curve {
            writeln!(f, "  {:5.2} m/s  {:8.2} N", p.speed, p.total)?;
        }
        let p = &self.plan;
        writeln!(f, "thrust plan")?;
        writeln!(f, "  active {:.2} N  nominal {:.2} N  final {:.2} N", p.active_thrust, p.nominal_thrust, p.final_thrust)?;
        writeln!(f, "  {} x {:.1} N units", p.thruster_count, p.unit_static_thrust)?;
        writeln!(f, "equilibrium speed")?;
        for e in &self.equilibrium {
            writeln!(f, "  {} thrusters  {:.3} m/s", e.thrusters, e.speed)?;
        }
        Ok(())
    }
}
