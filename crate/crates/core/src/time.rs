//! Picosecond time base.
//!
//! All event times inside the simulator are signed 64-bit picosecond ticks,
//! which covers runs of more than 10^6 s. Configuration values are SI seconds
//! and converted once at the boundary.

pub const PS_PER_NS: i64 = 1_000;
pub const PS_PER_US: i64 = 1_000_000;
pub const PS_PER_S: i64 = 1_000_000_000_000;

pub fn secs_to_ps(seconds: f64) -> i64 {
    (seconds * 1e12).round() as i64
}

pub fn ps_to_secs(ps: i64) -> f64 {
    ps as f64 * 1e-12
}

/// Round `t` to the nearest multiple of `grid` (> 0), half up.
pub fn quantize_ps(t: i64, grid: i64) -> i64 {
    debug_assert!(grid > 0);
    (t + grid / 2).div_euclid(grid) * grid
}
