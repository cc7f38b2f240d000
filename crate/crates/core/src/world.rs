//! Simulated surroundings: obstacles for the lidar and sonar to hit, and
//! turbulent patches that degrade sonar confidence.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::dynamics::VesselState;
use crate::perception::{LidarSample, LidarSweep, SonarPing};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum Obstacle {
    Circle { x: f64, y: f64, radius: f64 },
    Segment { x1: f64, y1: f64, x2: f64, y2: f64 },
}

/// Region where sonar returns lose confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct TurbulenceZone {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// Confidence reported while the vessel is inside, percent.
    pub confidence: u8,
}

impl Obstacle {
    /// Distance along the unit ray `(dx, dy)` from `(ox, oy)` to the first
    /// hit, if any.
    pub fn raycast(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        match *self {
            Obstacle::Circle { x, y, radius } => {
                let fx = ox - x;
                let fy = oy - y;
                let b = fx * dx + fy * dy;
                let c = fx * fx + fy * fy - radius * radius;
                if c <= 0.0 {
                    return Some(0.0);
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - libm::sqrt(disc);
                (t >= 0.0).then_some(t)
            }
            Obstacle::Segment { x1, y1, x2, y2 } => {
                let ex = x2 - x1;
                let ey = y2 - y1;
                let denom = dx * ey - dy * ex;
                if denom.abs() < 1e-12 {
                    return None;
                }
                let wx = x1 - ox;
                let wy = y1 - oy;
                let t = (wx * ey - wy * ex) / denom;
                let s = (wx * dy - wy * dx) / denom;
                (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
            }
        }
    }

    /// Shortest distance from a point to the obstacle surface, zero inside.
    pub fn clearance(&self, px: f64, py: f64) -> f64 {
        match *self {
            Obstacle::Circle { x, y, radius } => (libm::hypot(px - x, py - y) - radius).max(0.0),
            Obstacle::Segment { x1, y1, x2, y2 } => {
                let ex = x2 - x1;
                let ey = y2 - y1;
                let len2 = ex * ex + ey * ey;
                let s = if len2 > 0.0 {
                    (((px - x1) * ex + (py - y1) * ey) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                libm::hypot(px - (x1 + s * ex), py - (y1 + s * ey))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct World {
    pub obstacles: Vec<Obstacle>,
    pub turbulence: Vec<TurbulenceZone>,
    /// Water depth, m; `None` for open water with no bottom return.
    pub depth: Option<f64>,
}

impl World {
    /// Nearest hit along a compass bearing from `(x, y)`.
    pub fn raycast(&self, x: f64, y: f64, bearing_deg: f64, max_range: f64) -> Option<f64> {
        let (s, c) = libm::sincos(bearing_deg.to_radians());
        self.obstacles
            .iter()
            .filter_map(|o| o.raycast(x, y, s, c))
            .filter(|d| *d <= max_range)
            .fold(None, |best: Option<f64>, d| Some(best.map_or(d, |b| b.min(d))))
    }

    pub fn clearance(&self, x: f64, y: f64) -> Option<f64> {
        self.obstacles
            .iter()
            .map(|o| o.clearance(x, y))
            .fold(None, |best: Option<f64>, d| Some(best.map_or(d, |b| b.min(d))))
    }

    /// Lowest sonar confidence among the zones containing `(x, y)`.
    pub fn sonar_confidence(&self, x: f64, y: f64) -> u8 {
        self.turbulence
            .iter()
            .filter(|z| libm::hypot(x - z.x, y - z.y) <= z.radius)
            .map(|z| z.confidence)
            .min()
            .unwrap_or(100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct LidarSimConfig {
    pub samples_per_sweep: usize,
    /// m
    pub max_range: f64,
    /// Range noise standard deviation, m.
    pub noise: f64,
    pub quality: u8,
}

impl Default for LidarSimConfig {
    fn default() -> Self {
        Self {
            samples_per_sweep: 3200,
            max_range: 40.0,
            noise: 0.02,
            quality: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SonarSimConfig {
    pub enabled: bool,
    /// deg below horizontal
    pub mount_angle: f64,
    /// m along the beam
    pub max_range: f64,
    /// m
    pub noise: f64,
}

impl Default for SonarSimConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mount_angle: 15.0,
            max_range: 30.0,
            noise: 0.1,
        }
    }
}

/// One full lidar revolution from the vessel pose. Rays without a return
/// produce no sample.
pub fn simulate_lidar<R: Rng + ?Sized>(
    world: &World,
    state: &VesselState,
    cfg: &LidarSimConfig,
    rng: &mut R,
) -> LidarSweep {
    let n = cfg.samples_per_sweep.max(1);
    let step = 360.0 / n as f64;
    let mut samples = Vec::new();
    for i in 0..n {
        let rel = i as f64 * step;
        if let Some(d) = world.raycast(state.x, state.y, state.psi + rel, cfg.max_range) {
            let z: f64 = StandardNormal.sample(rng);
            samples.push(LidarSample {
                bearing: rel,
                distance: (d + cfg.noise * z).max(0.0),
                quality: cfg.quality,
            });
        }
    }
    LidarSweep { samples }
}

/// One ping from the bow sonar. Shallow mounts range obstacles dead ahead;
/// steep mounts see the bottom. Inside turbulence the reported confidence
/// drops to the zone value.
pub fn simulate_sonar<R: Rng + ?Sized>(
    world: &World,
    state: &VesselState,
    cfg: &SonarSimConfig,
    rng: &mut R,
) -> SonarPing {
    let z: f64 = StandardNormal.sample(rng);
    let (s, c) = libm::sincos(cfg.mount_angle.to_radians());
    let horizontal_max = cfg.max_range * c;
    let obstacle = world
        .raycast(state.x, state.y, state.psi, horizontal_max)
        .filter(|_| c > 1e-9)
        .map(|h| h / c);
    let bottom = world.depth.filter(|_| s > 1e-9).map(|d| d / s);
    let slant = match (obstacle, bottom) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
    .filter(|d| *d <= cfg.max_range);
    match slant {
        Some(d) => SonarPing {
            slant_distance: (d + cfg.noise * z).max(0.0),
            confidence: world.sonar_confidence(state.x, state.y),
            mount_angle: cfg.mount_angle,
        },
        None => SonarPing {
            slant_distance: cfg.max_range,
            confidence: 0,
            mount_angle: cfg.mount_angle,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circle_ray() {
        let c = Obstacle::Circle { x: 0.0, y: 10.0, radius: 2.0 };
        assert!((c.raycast(0.0, 0.0, 0.0, 1.0).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(c.raycast(0.0, 0.0, 0.0, -1.0), None);
        assert_eq!(c.raycast(0.0, 0.0, 1.0, 0.0), None);
        assert_eq!(c.raycast(0.0, 10.0, 1.0, 0.0), Some(0.0));
    }

    #[test]
    fn segment_ray() {
        let wall = Obstacle::Segment { x1: -5.0, y1: 20.0, x2: 5.0, y2: 20.0 };
        assert!((wall.raycast(0.0, 0.0, 0.0, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(wall.raycast(10.0, 0.0, 0.0, 1.0), None);
        assert_eq!(wall.raycast(0.0, 0.0, 1.0, 0.0), None);
        assert!((wall.clearance(0.0, 17.0) - 3.0).abs() < 1e-12);
        assert!((wall.clearance(8.0, 16.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn world_bearing_convention() {
        let world = World {
            obstacles: vec![Obstacle::Circle { x: 10.0, y: 0.0, radius: 1.0 }],
            ..World::default()
        };
        assert!((world.raycast(0.0, 0.0, 90.0, 40.0).unwrap() - 9.0).abs() < 1e-9);
        assert_eq!(world.raycast(0.0, 0.0, 270.0, 40.0), None);
        assert_eq!(world.raycast(0.0, 0.0, 90.0, 5.0), None);
    }

    #[test]
    fn lidar_is_body_relative() {
        let world = World {
            obstacles: vec![Obstacle::Circle { x: 10.0, y: 0.0, radius: 1.0 }],
            ..World::default()
        };
        let state = VesselState::at_rest(0.0, 0.0, 90.0);
        let cfg = LidarSimConfig {
            noise: 0.0,
            ..LidarSimConfig::default()
        };
        let sweep = simulate_lidar(&world, &state, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let bow = sweep.samples.iter().find(|s| s.bearing == 0.0).unwrap();
        assert!((bow.distance - 9.0).abs() < 1e-9);
        assert!(sweep.samples.iter().all(|s| s.bearing < 30.0 || s.bearing > 330.0));
    }

    #[test]
    fn sonar_turbulence_and_bottom() {
        let world = World {
            obstacles: vec![Obstacle::Segment { x1: -50.0, y1: 10.0, x2: 50.0, y2: 10.0 }],
            turbulence: vec![TurbulenceZone { x: 0.0, y: 0.0, radius: 3.0, confidence: 20 }],
            depth: None,
        };
        let cfg = SonarSimConfig {
            noise: 0.0,
            ..SonarSimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = simulate_sonar(&world, &VesselState::at_rest(0.0, 0.0, 0.0), &cfg, &mut rng);
        assert_eq!(p.confidence, 20);
        let (h, _) = crate::perception::project_sonar(p.slant_distance, p.mount_angle);
        assert!((h - 10.0).abs() < 1e-9);
        let p = simulate_sonar(&world, &VesselState::at_rest(0.0, 5.0, 0.0), &cfg, &mut rng);
        assert_eq!(p.confidence, 100);
        let deep = SonarSimConfig {
            mount_angle: 80.0,
            ..cfg
        };
        let shallow = World {
            depth: Some(0.4),
            ..World::default()
        };
        let p = simulate_sonar(&shallow, &VesselState::at_rest(0.0, 0.0, 0.0), &deep, &mut rng);
        assert!((p.slant_distance - 0.4 / libm::sin(80f64.to_radians())).abs() < 1e-9);
        let open = simulate_sonar(&World::default(), &VesselState::at_rest(0.0, 0.0, 0.0), &deep, &mut rng);
        assert_eq!(open.confidence, 0);
    }
}
