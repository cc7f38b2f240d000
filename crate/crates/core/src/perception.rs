//! Lidar/sonar downsampling into the 72-sector obstacle ring.
//!
//! Sectors are body-fixed, 5 degrees wide, centered on the bow for sector 0
//! and numbered clockwise. Distances travel in centimeters with
//! [`NO_READING`] marking an empty sector.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::angle::wrap_360;

pub const SECTOR_COUNT: usize = 72;
pub const SECTOR_WIDTH_DEG: f64 = 5.0;
/// Sentinel for a sector without a reading.
pub const NO_READING: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PerceptionError {
    #[error("empty bin")]
    EmptyBin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarSample {
    /// Body-relative bearing, deg clockwise from the bow.
    pub bearing: f64,
    /// m
    pub distance: f64,
    pub quality: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LidarSweep {
    pub samples: Vec<LidarSample>,
}

/// Sector holding a body-relative bearing.
pub fn sector_index(bearing: f64) -> usize {
    let shifted = wrap_360(bearing + SECTOR_WIDTH_DEG / 2.0);
    let idx = libm::floor(shifted / SECTOR_WIDTH_DEG) as usize;
    idx.min(SECTOR_COUNT - 1)
}

/// Center bearing of a sector, deg.
pub fn sector_center(index: usize) -> f64 {
    index as f64 * SECTOR_WIDTH_DEG
}

/// Groups sample distances by sector, dropping samples below `quality_min`.
pub fn bin_sweep(sweep: &LidarSweep, quality_min: u8) -> Vec<Vec<f64>> {
    let mut bins = vec![Vec::new(); SECTOR_COUNT];
    for s in &sweep.samples {
        if s.quality >= quality_min && s.distance.is_finite() && s.distance >= 0.0 {
            bins[sector_index(s.bearing)].push(s.distance);
        }
    }
    bins
}

/// Average weighted toward the bin minimum with `w = exp(-(d - d_min) / delta)`.
pub fn weighted_min_average(bin: &[f64], delta: f64) -> Result<f64, PerceptionError> {
    let d_min = bin
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !d_min.is_finite() {
        return Err(PerceptionError::EmptyBin);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &d in bin {
        let w = libm::exp(-(d - d_min) / delta);
        num += w * d;
        den += w;
    }
    // exact for constant bins; guards rounding below the minimum
    Ok((num / den).max(d_min))
}

/// One distance per sector from a sweep, `None` where the bin is empty.
pub fn downsample(sweep: &LidarSweep, quality_min: u8, delta: f64) -> Vec<Option<f64>> {
    bin_sweep(sweep, quality_min)
        .iter()
        .map(|b| weighted_min_average(b, delta).ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonarPing {
    /// m along the beam
    pub slant_distance: f64,
    /// percent, 0..=100
    pub confidence: u8,
    /// deg below horizontal
    pub mount_angle: f64,
}

/// Moving average over the most recent qualifying pings.
#[derive(Debug, Clone, PartialEq)]
pub struct SonarFilter {
    window: usize,
    confidence_min: u8,
    recent: VecDeque<f64>,
}

impl SonarFilter {
    pub fn new(window: usize, confidence_min: u8) -> Self {
        let window = window.max(1);
        Self {
            window,
            confidence_min,
            recent: VecDeque::with_capacity(window),
        }
    }

    /// Feeds one ping and returns the filtered slant distance, if enough
    /// qualifying pings (at least half the window, rounded up) are present.
    pub fn push(&mut self, ping: &SonarPing) -> Option<f64> {
        if ping.confidence >= self.confidence_min && ping.slant_distance.is_finite() {
            if self.recent.len() == self.window {
                self.recent.pop_front();
            }
            self.recent.push_back(ping.slant_distance);
        }
        self.value()
    }

    pub fn value(&self) -> Option<f64> {
        if self.recent.len() < self.window.div_ceil(2) {
            return None;
        }
        Some(self.recent.iter().sum::<f64>() / self.recent.len() as f64)
    }

    pub fn reset(&mut self) {
        self.recent.clear();
    }
}

/// Mount angle above which the sonar only sees the bottom.
pub const FLOOR_MODE_ANGLE_DEG: f64 = 50.0;

/// Horizontal range of a slant reading and whether the mount is in
/// bottom-detection territory.
pub fn project_sonar(slant: f64, mount_angle: f64) -> (f64, bool) {
    let horizontal = (slant * libm::cos(mount_angle.to_radians())).max(0.0);
    (horizontal, mount_angle > FLOOR_MODE_ANGLE_DEG)
}

/// The fused obstacle ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SectorArray {
    pub t_ms: u32,
    #[cfg_attr(feature = "serde", serde(with = "sector_serde"))]
    pub distances: [u16; SECTOR_COUNT],
}

impl Default for SectorArray {
    fn default() -> Self {
        Self::empty(0)
    }
}

impl SectorArray {
    pub fn empty(t_ms: u32) -> Self {
        Self {
            t_ms,
            distances: [NO_READING; SECTOR_COUNT],
        }
    }

    /// Distance in meters, `None` for the sentinel.
    pub fn distance_m(&self, sector: usize) -> Option<f64> {
        match self.distances[sector % SECTOR_COUNT] {
            NO_READING => None,
            cm => Some(cm as f64 / 100.0),
        }
    }

    /// Nearest reading within `half_width` sectors either side of the bow.
    pub fn nearest_ahead(&self, half_width: usize) -> Option<f64> {
        let hw = half_width.min(SECTOR_COUNT / 2) as isize;
        (-hw..=hw)
            .filter_map(|k| self.distance_m(k.rem_euclid(SECTOR_COUNT as isize) as usize))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
    }

    /// FNV-1a over the distance words; a compact per-tick log digest.
    pub fn digest(&self) -> u32 {
        let mut h: u32 = 0x811c_9dc5;
        for d in self.distances {
            for b in d.to_le_bytes() {
                h ^= b as u32;
                h = h.wrapping_mul(0x0100_0193);
            }
        }
        h
    }
}

#[cfg(feature = "serde")]
pub(crate) mod sector_serde {
    use super::SECTOR_COUNT;
    use alloc::vec::Vec;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[u16; SECTOR_COUNT], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u16; SECTOR_COUNT], D::Error> {
        let v = Vec::<u16>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<u16>| D::Error::invalid_length(v.len(), &"72 sector distances"))
    }
}

/// Valid reporting window, cm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct RangeLimits {
    pub min_cm: u16,
    pub max_cm: u16,
}

impl Default for RangeLimits {
    fn default() -> Self {
        Self {
            min_cm: 0,
            max_cm: 4000,
        }
    }
}

fn to_cm(m: f64, limits: RangeLimits) -> u16 {
    let cm = libm::floor(m * 100.0 + 0.5);
    let cm = cm.clamp(limits.min_cm as f64, limits.max_cm as f64);
    cm as u16
}

/// Combines per-sector lidar ranges with an optional forward sonar range
/// (already projected to the horizontal) into the obstacle ring.
///
/// Each sector takes the minimum of its sources. Sonar only feeds the bow
/// sector.
pub fn fuse(
    lidar: &[Option<f64>],
    sonar_horizontal: Option<f64>,
    limits: RangeLimits,
    t_ms: u32,
) -> SectorArray {
    let mut out = SectorArray::empty(t_ms);
    for (i, slot) in out.distances.iter_mut().enumerate() {
        let mut best = lidar.get(i).copied().flatten();
        if i == 0 {
            if let Some(s) = sonar_horizontal {
                best = Some(best.map_or(s, |b| b.min(s)));
            }
        }
        if let Some(m) = best.filter(|m| m.is_finite() && *m >= 0.0) {
            *slot = to_cm(m, limits);
        }
    }
    out
}

/// Obstacle slow/stop response on the bow cone.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct ProximityPolicy {
    pub enabled: bool,
    /// m
    pub slow_distance: f64,
    /// m
    pub stop_distance: f64,
    pub slow_scale: f64,
    /// sectors either side of the bow
    pub cone_half_width: usize,
}

impl Default for ProximityPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            slow_distance: 10.0,
            stop_distance: 4.0,
            slow_scale: 0.3,
            cone_half_width: 3,
        }
    }
}

impl ProximityPolicy {
    /// Multiplier for the speed setpoint: 0 inside the stop distance, the
    /// slow scale inside the slow distance, 1 otherwise.
    pub fn speed_scale(&self, array: &SectorArray) -> f64 {
        if !self.enabled {
            return 1.0;
        }
        proximity_policy(
            array,
            self.slow_distance,
            self.stop_distance,
            self.cone_half_width,
            self.slow_scale,
        )
    }
}

pub fn proximity_policy(
    array: &SectorArray,
    slow_distance: f64,
    stop_distance: f64,
    cone_half_width: usize,
    slow_scale: f64,
) -> f64 {
    match array.nearest_ahead(cone_half_width) {
        Some(d) if d <= stop_distance => 0.0,
        Some(d) if d <= slow_distance => slow_scale,
        _ => 1.0,
    }
}

/// Stateful lidar + sonar front end, one per vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionPipeline {
    pub quality_min: u8,
    pub delta: f64,
    pub limits: RangeLimits,
    sonar: SonarFilter,
    /// Latched when a bottom-looking sonar reports shallow water.
    pub shallow_water: bool,
    pub shallow_threshold: f64,
}

impl PerceptionPipeline {
    pub fn new(config: &PerceptionConfig) -> Self {
        Self {
            quality_min: config.quality_min,
            delta: config.delta,
            limits: config.limits,
            sonar: SonarFilter::new(config.sonar_window, config.sonar_confidence_min),
            shallow_water: false,
            shallow_threshold: config.shallow_threshold,
        }
    }

    pub fn process(&mut self, sweep: &LidarSweep, ping: Option<&SonarPing>, t_ms: u32) -> SectorArray {
        let lidar = downsample(sweep, self.quality_min, self.delta);
        let mut sonar_h = None;
        if let Some(p) = ping {
            if let Some(slant) = self.sonar.push(p) {
                let (h, floor) = project_sonar(slant, p.mount_angle);
                if floor {
                    self.shallow_water = slant <= self.shallow_threshold;
                } else {
                    sonar_h = Some(h);
                }
            }
        }
        fuse(&lidar, sonar_h, self.limits, t_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct PerceptionConfig {
    pub quality_min: u8,
    /// weighting scale, m
    pub delta: f64,
    pub limits: RangeLimits,
    pub sonar_window: usize,
    pub sonar_confidence_min: u8,
    /// bottom distance treated as shallow in floor mode, m
    pub shallow_threshold: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            quality_min: 10,
            delta: 0.5,
            limits: RangeLimits::default(),
            sonar_window: 5,
            sonar_confidence_min: 50,
            shallow_threshold: 0.5,
        }
    }
}
