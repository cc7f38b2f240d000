//! Compass angle helpers.

/// Wraps any finite angle in degrees into `[0, 360)`.
pub fn wrap_360(deg: f64) -> f64 {
    let w = libm::fmod(deg, 360.0);
    let w = if w < 0.0 { w + 360.0 } else { w };
    // fmod of tiny negatives can round up to exactly 360.0
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Wraps any finite angle in degrees into `(-180, 180]`.
pub fn wrap_180(deg: f64) -> f64 {
    let w = wrap_360(deg);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Shortest signed rotation from `current_deg` to `target_deg`.
///
/// Positive means the target lies clockwise of the current heading. An exact
/// half-turn resolves to `+180`.
pub fn wrap_error(target_deg: f64, current_deg: f64) -> f64 {
    wrap_180(target_deg - current_deg)
}

/// Compass bearing (degrees) of the vector `(east, north)`.
pub fn bearing(east: f64, north: f64) -> f64 {
    wrap_360(libm::atan2(east, north).to_degrees())
}
