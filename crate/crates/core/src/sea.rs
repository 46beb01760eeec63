//! Series elastic actuator unit.
//!
//! One unit couples a current-driven DC motor (lumped with its reduction
//! gear and belt at the output shaft) to a joint through a bidirectional
//! torsion spring. The spring carries hard stops at the travel limits and
//! a small Coulomb friction memory that produces the torque-deflection
//! hysteresis loop. Angle sensing is a pair of quantized sensors, one on
//! each side of the spring; their difference is the torque signal.
//!
//! All functions here are state-in/state-out with no global state.
//! Instances are independent and safe to evaluate on different threads.

use serde::{Deserialize, Serialize};

use crate::units::{dps_to_rpm, DEG_TO_RAD, RAD_TO_DEG};

/// Velocity half-width of the gear friction stiction band (deg/s).
pub const STICTION_BAND_DPS: f64 = 0.5;

/// Distance scale of the spring friction memory transition (N·m per deg
/// of relative travel). Large enough that the memory saturates within
/// ~0.1° at the default hysteresis torque, which keeps quasi-static
/// hysteresis loops within 1% of the ideal Coulomb parallelogram.
const HYSTERESIS_TRANSITION_NM_PER_DEG: f64 = 0.05;

/// Constants of one actuator unit. Torques and speeds are referred to the
/// output shaft; the gear ratio and belt are lumped, not modeled
/// stage-by-stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaParams {
    /// Output torque per ampere of commanded current (N·m/A).
    pub torque_constant_nm_per_a: f64,
    /// Maximum output torque at zero speed (N·m).
    pub stall_torque_nm: f64,
    /// Output speed at which the driving torque envelope reaches zero (rpm).
    pub no_load_speed_rpm: f64,
    /// Reduction ratio (output:input = 1:gear_ratio), kept for reference.
    pub gear_ratio: f64,
    /// Total angular play in the geartrain (deg).
    pub backlash_deg: f64,
    /// Coulomb friction at the output: torque needed to back-drive the
    /// unpowered geartrain (N·m).
    pub back_drive_torque_nm: f64,
    /// Torsion spring constant (N·m/deg).
    pub spring_k_nm_per_deg: f64,
    /// Symmetric spring travel limit where the hard stops engage (deg).
    pub spring_travel_deg: f64,
    /// Penalty stiffness of the hard stops (N·m/deg).
    pub stop_stiffness_nm_per_deg: f64,
    /// Penalty damping of the hard stops (N·m·s/deg).
    pub stop_damping_nms_per_deg: f64,
    /// Coulomb torsional friction inside the spring assembly (N·m).
    pub hysteresis_torque_nm: f64,
    /// Motor rotor inertia reflected to the output shaft (kg·m²).
    pub reflected_inertia_kgm2: f64,
    /// Viscous damping on the motor side (N·m·s/rad).
    pub motor_damping_nms_per_rad: f64,
    /// Angle sensor quantization step (deg/count).
    pub sensor_resolution_deg: f64,
    /// Disable sensor quantization (ideal sensor).
    pub ideal_sensor: bool,
}

impl SeaParams {
    /// Parameters with the as-built spring constant (0.012 N·m/deg).
    pub fn measured() -> Self {
        Self {
            torque_constant_nm_per_a: 0.48,
            stall_torque_nm: 1.33,
            no_load_speed_rpm: 156.5,
            gear_ratio: 61.4,
            backlash_deg: 0.22,
            back_drive_torque_nm: 0.135,
            spring_k_nm_per_deg: 0.012,
            spring_travel_deg: 40.0,
            stop_stiffness_nm_per_deg: 1.0,
            stop_damping_nms_per_deg: 0.01,
            hysteresis_torque_nm: 0.005,
            reflected_inertia_kgm2: 1.0e-4,
            motor_damping_nms_per_rad: 1.0e-3,
            sensor_resolution_deg: 0.088,
            ideal_sensor: false,
        }
    }

    /// Parameters with the nominal spring constant (0.015 N·m/deg).
    pub fn design() -> Self {
        Self {
            spring_k_nm_per_deg: 0.015,
            ..Self::measured()
        }
    }

    /// Current that produces the stall torque (A).
    pub fn stall_current_a(&self) -> f64 {
        self.stall_torque_nm / self.torque_constant_nm_per_a
    }

    /// Check parameter ranges. Returns the offending field name and a
    /// description on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive: [(&'static str, f64); 7] = [
            ("torque_constant_nm_per_a", self.torque_constant_nm_per_a),
            ("stall_torque_nm", self.stall_torque_nm),
            ("no_load_speed_rpm", self.no_load_speed_rpm),
            ("gear_ratio", self.gear_ratio),
            ("spring_k_nm_per_deg", self.spring_k_nm_per_deg),
            ("spring_travel_deg", self.spring_travel_deg),
            ("stop_stiffness_nm_per_deg", self.stop_stiffness_nm_per_deg),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err((name, format!("must be > 0, got {v}")));
            }
        }
        let nonneg: [(&'static str, f64); 5] = [
            ("backlash_deg", self.backlash_deg),
            ("back_drive_torque_nm", self.back_drive_torque_nm),
            ("hysteresis_torque_nm", self.hysteresis_torque_nm),
            ("stop_damping_nms_per_deg", self.stop_damping_nms_per_deg),
            ("motor_damping_nms_per_rad", self.motor_damping_nms_per_rad),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err((name, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.reflected_inertia_kgm2 > 0.0) {
            return Err((
                "reflected_inertia_kgm2",
                format!("must be > 0, got {}", self.reflected_inertia_kgm2),
            ));
        }
        if !self.ideal_sensor && !(self.sensor_resolution_deg > 0.0) {
            return Err((
                "sensor_resolution_deg",
                format!("must be > 0, got {}", self.sensor_resolution_deg),
            ));
        }
        let max_spring = self.spring_k_nm_per_deg * self.spring_travel_deg;
        if max_spring > self.stall_torque_nm {
            return Err((
                "spring_k_nm_per_deg",
                format!(
                    "spring torque at full travel ({max_spring} N·m) exceeds stall torque ({} N·m)",
                    self.stall_torque_nm
                ),
            ));
        }
        Ok(())
    }
}

impl Default for SeaParams {
    fn default() -> Self {
        Self::measured()
    }
}

/// Whether the spring is installed or replaced by a rigid part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpringMode {
    Active,
    Locked,
}

/// Per-instant state of one actuator unit. Angle A is the motor/gear
/// output side of the spring, angle B is the joint side; their difference
/// is the spring deflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeaState {
    /// Gear output angle after backlash, as seen by sensor A (deg).
    pub motor_angle_deg: f64,
    /// Motor-side shaft velocity (deg/s).
    pub motor_velocity_dps: f64,
    /// Joint angle, as seen by sensor B (deg).
    pub joint_angle_deg: f64,
    /// Joint velocity (deg/s).
    pub joint_velocity_dps: f64,
    pub spring_mode: SpringMode,
    /// Deadband position: sensor-A angle minus the pre-backlash gear angle
    /// (deg), bounded by ±backlash/2.
    pub backlash_offset_deg: f64,
    /// Friction torque memory of the spring assembly (N·m), bounded by
    /// ±hysteresis_torque.
    pub hysteresis_nm: f64,
}

impl SeaState {
    /// State at rest with zero deflection at the given joint angle.
    pub fn at_rest(joint_angle_deg: f64, spring_mode: SpringMode) -> Self {
        Self {
            motor_angle_deg: joint_angle_deg,
            motor_velocity_dps: 0.0,
            joint_angle_deg,
            joint_velocity_dps: 0.0,
            spring_mode,
            backlash_offset_deg: 0.0,
            hysteresis_nm: 0.0,
        }
    }

    /// Spring deflection: motor-side angle minus joint angle (deg).
    pub fn deflection_deg(&self) -> f64 {
        self.motor_angle_deg - self.joint_angle_deg
    }

    pub fn deflection_rate_dps(&self) -> f64 {
        self.motor_velocity_dps - self.joint_velocity_dps
    }

    /// Name of the first non-finite field, if any.
    pub fn non_finite_field(&self) -> Option<&'static str> {
        [
            ("motor angle", self.motor_angle_deg),
            ("motor velocity", self.motor_velocity_dps),
            ("joint angle", self.joint_angle_deg),
            ("joint velocity", self.joint_velocity_dps),
            ("backlash offset", self.backlash_offset_deg),
            ("hysteresis torque", self.hysteresis_nm),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

/// Torque transmitted through the spring for a given deflection, together
/// with the updated friction memory.
///
/// The torque is `k·δ` plus a hard-stop penalty beyond ±travel plus the
/// Coulomb friction term. The friction memory relaxes toward `±τ_h` over
/// a fixed distance of relative travel (a Dahl-style bristle), so it
/// persists at rest (true stiction) and flips sign over a short smooth
/// transition after a motion reversal. `dt_s` is the integration substep
/// used to convert the rate into travel.
pub fn spring_torque(
    deflection_deg: f64,
    deflection_rate_dps: f64,
    dt_s: f64,
    params: &SeaParams,
    hysteresis_nm: f64,
) -> (f64, f64) {
    let tau_h = params.hysteresis_torque_nm;
    let new_hysteresis = if tau_h <= 0.0 {
        0.0
    } else {
        let travel = deflection_rate_dps * dt_s;
        let target = if travel > 0.0 {
            tau_h
        } else if travel < 0.0 {
            -tau_h
        } else {
            hysteresis_nm
        };
        let keep = (-HYSTERESIS_TRANSITION_NM_PER_DEG * travel.abs() / tau_h).exp();
        target + (hysteresis_nm - target) * keep
    };

    let travel_limit = params.spring_travel_deg;
    let stop = if deflection_deg > travel_limit {
        params.stop_stiffness_nm_per_deg * (deflection_deg - travel_limit)
            + params.stop_damping_nms_per_deg * deflection_rate_dps
    } else if deflection_deg < -travel_limit {
        params.stop_stiffness_nm_per_deg * (deflection_deg + travel_limit)
            + params.stop_damping_nms_per_deg * deflection_rate_dps
    } else {
        0.0
    };

    let torque = params.spring_k_nm_per_deg * deflection_deg + stop + new_hysteresis;
    (torque, new_hysteresis)
}

/// Output torque produced by a current command at a given output speed.
///
/// The raw torque `k_t·i` is clamped to ±stall torque always, and to the
/// linear speed-torque envelope when torque and speed have the same sign
/// (driving). Braking torque is limited by the stall clamp only.
pub fn motor_available_torque(current_a: f64, output_speed_rpm: f64, params: &SeaParams) -> f64 {
    let raw = params.torque_constant_nm_per_a * current_a;
    let mut torque = raw.clamp(-params.stall_torque_nm, params.stall_torque_nm);
    if torque * output_speed_rpm > 0.0 {
        let envelope = params.stall_torque_nm
            * (1.0 - output_speed_rpm.abs() / params.no_load_speed_rpm).max(0.0);
        torque = torque.clamp(-envelope, envelope);
    }
    torque
}

/// Deadband play model of the geartrain.
///
/// The output angle persists until the moving deadband window drags it
/// along: `output = clamp(prev_output, motor ± backlash/2)`. Returns the
/// new output angle and the new deadband offset `output − motor`.
pub fn backlash_transfer(
    motor_side_deg: f64,
    prev_output_deg: f64,
    backlash_deg: f64,
) -> (f64, f64) {
    let half = backlash_deg / 2.0;
    let output = prev_output_deg.clamp(motor_side_deg - half, motor_side_deg + half);
    (output, output - motor_side_deg)
}

/// Coulomb friction at the geartrain output.
///
/// In the stiction band the friction cancels the applied torque up to the
/// back-drive torque; when slipping it opposes motion with the back-drive
/// magnitude, tanh-regularized.
pub fn gear_friction_torque(output_speed_dps: f64, applied_torque_nm: f64, params: &SeaParams) -> f64 {
    let bd = params.back_drive_torque_nm;
    if bd <= 0.0 {
        return 0.0;
    }
    if output_speed_dps.abs() < STICTION_BAND_DPS {
        (-applied_torque_nm).clamp(-bd, bd)
    } else {
        -bd * (output_speed_dps / STICTION_BAND_DPS).tanh()
    }
}

/// Round-to-nearest sensor quantization. Identity when the ideal-sensor
/// flag is set.
pub fn sensor_read(true_angle_deg: f64, params: &SeaParams) -> f64 {
    if params.ideal_sensor {
        return true_angle_deg;
    }
    (true_angle_deg / params.sensor_resolution_deg).round() * params.sensor_resolution_deg
}

/// Error raised when an actuator state stops being finite.
#[derive(Debug, Clone, thiserror::Error)]
#[error("non-finite {quantity} in actuator state")]
pub struct NonFinite {
    pub quantity: &'static str,
}

/// Advance the motor side of one unit by one substep with the spring
/// torque already evaluated. The joint-side fields are carried through
/// unchanged; the caller owns their integration.
pub(crate) fn advance_motor_side(
    state: &SeaState,
    current_a: f64,
    spring_torque_nm: f64,
    new_hysteresis_nm: f64,
    dt_s: f64,
    params: &SeaParams,
) -> SeaState {
    let speed_rpm = dps_to_rpm(state.motor_velocity_dps);
    let motor_nm = motor_available_torque(current_a, speed_rpm, params);
    let applied_nm = motor_nm - spring_torque_nm;
    let friction_nm = gear_friction_torque(state.motor_velocity_dps, applied_nm, params);
    let damping_nm = params.motor_damping_nms_per_rad * state.motor_velocity_dps * DEG_TO_RAD;
    let accel_dps2 =
        (applied_nm + friction_nm - damping_nm) / params.reflected_inertia_kgm2 * RAD_TO_DEG;

    let velocity = state.motor_velocity_dps + accel_dps2 * dt_s;
    let gear_in = (state.motor_angle_deg - state.backlash_offset_deg) + velocity * dt_s;
    let (motor_angle, offset) =
        backlash_transfer(gear_in, state.motor_angle_deg, params.backlash_deg);

    SeaState {
        motor_angle_deg: motor_angle,
        motor_velocity_dps: velocity,
        backlash_offset_deg: offset,
        hysteresis_nm: new_hysteresis_nm,
        ..*state
    }
}

/// Advance the motor-side state of an active unit by one substep of the
/// motor ODE (semi-implicit Euler):
/// `J_reflected·θ̈_A = τ_motor − τ_spring + τ_gear_friction − c_m·θ̇_A`.
///
/// In locked mode this operation does not apply; the motor angle is
/// slaved to the joint angle by the world integrator.
pub fn sea_motor_step(
    state: &SeaState,
    current_a: f64,
    dt_s: f64,
    params: &SeaParams,
) -> Result<SeaState, NonFinite> {
    debug_assert!(dt_s > 0.0);
    debug_assert_eq!(state.spring_mode, SpringMode::Active);
    let (torque, hysteresis) = spring_torque(
        state.deflection_deg(),
        state.deflection_rate_dps(),
        dt_s,
        params,
        state.hysteresis_nm,
    );
    let next = advance_motor_side(state, current_a, torque, hysteresis, dt_s, params);
    match next.non_finite_field() {
        Some(name) => Err(NonFinite { quantity: name }),
        None => Ok(next),
    }
}
