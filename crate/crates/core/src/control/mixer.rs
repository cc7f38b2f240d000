#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MixerLimits {
    /// N
    pub max_thrust_per_side: f64,
    /// Shed forward thrust before yaw thrust when a side saturates.
    pub steering_priority: bool,
}

/// Splits forward and yaw thrust onto the two sides:
/// `left = forward - yaw`, `right = forward + yaw`.
///
/// With steering priority, a saturating side first lowers the forward
/// component until both sides fit; yaw is clamped only if it alone exceeds
/// the side limit. Without it, each side is clamped independently.
pub fn mix(t_forward: f64, t_yaw: f64, limits: &MixerLimits) -> (f64, f64) {
    let max = limits.max_thrust_per_side;
    if !limits.steering_priority {
        return (
            (t_forward - t_yaw).clamp(-max, max),
            (t_forward + t_yaw).clamp(-max, max),
        );
    }
    let yaw = t_yaw.clamp(-max, max);
    let room = max - yaw.abs();
    let forward = t_forward.clamp(-room, room);
    (forward - yaw, forward + yaw)
}
