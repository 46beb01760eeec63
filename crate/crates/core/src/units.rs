//! Unit conversions shared across the crate.
//!
//! Convention: configuration, traces, and all public angle interfaces use
//! degrees; internal rigid-body dynamics use radians and SI units.

use std::f64::consts::PI;

pub const DEG_TO_RAD: f64 = PI / 180.0;
pub const RAD_TO_DEG: f64 = 180.0 / PI;

/// 1 rpm = 6 deg/s.
pub fn dps_to_rpm(deg_per_s: f64) -> f64 {
    deg_per_s / 6.0
}

pub fn rpm_to_dps(rpm: f64) -> f64 {
    rpm * 6.0
}

/// Torsional stiffness given per degree, expressed per radian.
pub fn stiffness_per_rad(k_per_deg: f64) -> f64 {
    k_per_deg * RAD_TO_DEG
}
