//! Mission plans and the lawnmower survey generator.

use helm_core::control::{ControlMode, DEFAULT_ACCEPT_RADIUS};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::BatteryConfig;

fn default_accept_radius() -> f64 {
    DEFAULT_ACCEPT_RADIUS
}

fn default_transit_speed() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MissionItem {
    /// Go to a point, then hold it in loiter.
    Waypoint {
        x: f64,
        y: f64,
        #[serde(default = "default_accept_radius")]
        accept_radius: f64,
        #[serde(default = "default_transit_speed")]
        transit_speed: f64,
    },
    /// Hold speed (m/s) and compass heading (deg) for `duration` seconds.
    VelHeadLeg { speed: f64, heading: f64, duration: f64 },
    /// Station-keep on a point for `duration` seconds.
    LoiterAt { x: f64, y: f64, duration: f64 },
    SetMode { mode: ControlMode },
    /// Keep doing whatever the vessel is doing.
    Wait { duration: f64 },
}

impl MissionItem {
    pub fn kind(&self) -> &'static str {
        match self {
            MissionItem::Waypoint { .. } => "waypoint",
            MissionItem::VelHeadLeg { .. } => "vel_head_leg",
            MissionItem::LoiterAt { .. } => "loiter_at",
            MissionItem::SetMode { .. } => "set_mode",
            MissionItem::Wait { .. } => "wait",
        }
    }

    pub fn duration(&self) -> Option<f64> {
        match *self {
            MissionItem::VelHeadLeg { duration, .. }
            | MissionItem::LoiterAt { duration, .. }
            | MissionItem::Wait { duration } => Some(duration),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), (&'static str, &'static str)> {
        let finite = |v: f64| v.is_finite();
        match *self {
            MissionItem::Waypoint {
                x,
                y,
                accept_radius,
                transit_speed,
            } => {
                if !finite(x) || !finite(y) {
                    return Err(("x", "must be finite"));
                }
                if !(accept_radius > 0.0 && finite(accept_radius)) {
                    return Err(("accept_radius", "must be positive"));
                }
                if !(transit_speed > 0.0 && finite(transit_speed)) {
                    return Err(("transit_speed", "must be positive"));
                }
            }
            MissionItem::VelHeadLeg { speed, heading, .. } => {
                if !(speed >= 0.0 && finite(speed)) {
                    return Err(("speed", "must be non-negative"));
                }
                if !(0.0..360.0).contains(&heading) {
                    return Err(("heading", "must lie in [0, 360)"));
                }
            }
            MissionItem::LoiterAt { x, y, .. } => {
                if !finite(x) || !finite(y) {
                    return Err(("x", "must be finite"));
                }
            }
            MissionItem::SetMode { .. } | MissionItem::Wait { .. } => {}
        }
        if let Some(d) = self.duration() {
            if !(d > 0.0 && finite(d)) {
                return Err(("duration", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    pub items: Vec<MissionItem>,
    /// Launch point, m east and north.
    pub home: [f64; 2],
    pub battery: BatteryConfig,
    /// Leading part of each steady segment excluded from metrics, s.
    pub settle_window: f64,
}

impl MissionPlan {
    pub fn new(items: Vec<MissionItem>) -> Self {
        Self {
            items,
            home: [0.0, 0.0],
            battery: BatteryConfig::default(),
            settle_window: 20.0,
        }
    }

    /// Checks the plan, naming the offending field on failure.
    pub fn validate(&self) -> Result<(), (String, &'static str)> {
        if self.items.is_empty() {
            return Err(("mission.items".into(), "plan must contain at least one item"));
        }
        for (i, item) in self.items.iter().enumerate() {
            item.validate()
                .map_err(|(field, msg)| (format!("mission.items[{i}].{field}"), msg))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RangeError {
    #[error("lane spacing must be positive, got {0}")]
    Spacing(f64),
    #[error("survey rectangle is degenerate")]
    Degenerate,
    #[error("transit speed must be positive, got {0}")]
    Speed(f64),
}

/// Boustrophedon lanes over the axis-aligned rectangle spanned by two
/// corners, starting at `a`.
///
/// Lanes run parallel to the long side, `ceil(short / spacing) + 1` of them,
/// the last one clamped onto the far edge. Each lane contributes its two end
/// points and consecutive lanes run in opposite directions.
pub fn generate_survey_pattern(
    a: [f64; 2],
    b: [f64; 2],
    lane_spacing: f64,
    transit_speed: f64,
) -> Result<MissionPlan, RangeError> {
    if !(lane_spacing > 0.0 && lane_spacing.is_finite()) {
        return Err(RangeError::Spacing(lane_spacing));
    }
    if !(transit_speed > 0.0 && transit_speed.is_finite()) {
        return Err(RangeError::Speed(transit_speed));
    }
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    if !(dx.abs() > 0.0 && dy.abs() > 0.0) || !dx.is_finite() || !dy.is_finite() {
        return Err(RangeError::Degenerate);
    }
    let along_x = dx.abs() >= dy.abs();
    let (long, short) = if along_x { (dx, dy) } else { (dy, dx) };
    let ratio = short.abs() / lane_spacing;
    let gaps = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() };
    let lanes = gaps as usize + 1;
    let mut items = Vec::with_capacity(lanes * 2);
    for lane in 0..lanes {
        let offset = (lane as f64 * lane_spacing).min(short.abs()) * short.signum();
        let (s0, s1) = if lane % 2 == 0 { (0.0, long) } else { (long, 0.0) };
        for s in [s0, s1] {
            let (x, y) = if along_x {
                (a[0] + s, a[1] + offset)
            } else {
                (a[0] + offset, a[1] + s)
            };
            items.push(MissionItem::Waypoint {
                x,
                y,
                accept_radius: DEFAULT_ACCEPT_RADIUS,
                transit_speed,
            });
        }
    }
    Ok(MissionPlan {
        home: a,
        ..MissionPlan::new(items)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(plan: &MissionPlan) -> Vec<(f64, f64)> {
        plan.items
            .iter()
            .map(|i| match *i {
                MissionItem::Waypoint { x, y, .. } => (x, y),
                _ => panic!("survey emits waypoints only"),
            })
            .collect()
    }

    #[test]
    fn hundred_by_twenty() {
        let plan = generate_survey_pattern([0.0, 0.0], [100.0, 20.0], 5.0, 1.5).unwrap();
        assert_eq!(plan.items.len(), 10);
        let p = points(&plan);
        assert_eq!(p[0], (0.0, 0.0));
        assert_eq!(p[1], (100.0, 0.0));
        assert_eq!(p[2], (100.0, 5.0));
        assert_eq!(p[8], (0.0, 20.0));
        assert_eq!(p[9], (100.0, 20.0));
    }

    #[test]
    fn wide_spacing_gives_both_edges() {
        for spacing in [20.0, 25.0, 1e3] {
            let p = points(&generate_survey_pattern([0.0, 0.0], [100.0, 20.0], spacing, 1.0).unwrap());
            assert_eq!(p, vec![(0.0, 0.0), (100.0, 0.0), (100.0, 20.0), (0.0, 20.0)]);
        }
    }

    #[test]
    fn lanes_alternate_exactly() {
        let plan = generate_survey_pattern([10.0, -5.0], [-20.0, 75.0], 7.0, 1.0).unwrap();
        let p = points(&plan);
        let dirs: Vec<f64> = p
            .chunks(2)
            .map(|l| (l[1].1 - l[0].1).atan2(l[1].0 - l[0].0).to_degrees())
            .collect();
        for w in dirs.windows(2) {
            assert_eq!(((w[0] - w[1]).abs() - 180.0).abs(), 0.0);
        }
        // long side is north-south here
        assert!(p.chunks(2).all(|l| l[0].0 == l[1].0));
        assert_eq!(p.len(), 2 * ((30.0f64 / 7.0).ceil() as usize + 1));
        assert_eq!(p.last().unwrap().0, -20.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            generate_survey_pattern([0.0, 0.0], [1.0, 1.0], 0.0, 1.0),
            Err(RangeError::Spacing(0.0))
        );
        assert_eq!(
            generate_survey_pattern([0.0, 0.0], [0.0, 1.0], 1.0, 1.0),
            Err(RangeError::Degenerate)
        );
        assert!(generate_survey_pattern([0.0, 0.0], [5.0, 1.0], 1.0, -1.0).is_err());
    }
}
