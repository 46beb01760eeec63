//! Quasi-static spring calibration.
//!
//! The unit under test sits in a bench fixture: motor shaft clamped by a
//! lock gear, a pulley wheel on the output, and a torque staircase
//! 0 → +τ_max → 0 → −τ_max → 0 applied to the wheel. Each step waits for
//! the wheel to settle, then records the wheel rotation. Loading and
//! unloading branches are fitted separately by least squares; the
//! enclosed torque-deflection area is the hysteresis loop area.

use serde::{Deserialize, Serialize};

use crate::sea::spring_torque;
use crate::units::DEG_TO_RAD;

use super::{ExperimentConfig, ExperimentError};

/// Which half of the staircase a measurement belongs to: |τ| increasing
/// (loading) or decreasing (unloading).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadPhase {
    Loading,
    Unloading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub phase: LoadPhase,
    pub applied_nm: f64,
    /// Wheel rotation under load (deg).
    pub deflection_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub steps: Vec<CalibrationStep>,
    pub fitted_k_loading: f64,
    pub fitted_k_unloading: f64,
    /// Enclosed area of the torque-deflection cycle (N·m·deg).
    pub loop_area_nm_deg: f64,
    /// Worse of the two branch fits.
    pub r_squared: f64,
}

impl CalibrationRecord {
    pub fn load_steps_nm(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.applied_nm).collect()
    }

    pub fn deflections_deg(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.deflection_deg).collect()
    }
}

/// Least-squares line fit returning (slope, intercept, r²).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Area enclosed by the closed polygon of (deflection, torque) points.
fn shoelace_area(steps: &[CalibrationStep]) -> f64 {
    let mut area = 0.0;
    let n = steps.len();
    for i in 0..n {
        let a = &steps[i];
        let b = &steps[(i + 1) % n];
        area += a.deflection_deg * b.applied_nm - b.deflection_deg * a.applied_nm;
    }
    (area / 2.0).abs()
}

pub fn run_spring_calibration(config: &ExperimentConfig) -> Result<CalibrationRecord, ExperimentError> {
    let cal = &config.spring_cal;
    let params = &config.sea[cal.joint];
    let dt = config.physics_dt_s;
    let tau_max = cal
        .max_torque_nm
        .unwrap_or(params.spring_k_nm_per_deg * params.spring_travel_deg);

    // Staircase schedule with the phase of each target torque.
    let n = cal.steps_per_quadrant as i64;
    let mut schedule: Vec<(LoadPhase, f64)> = Vec::new();
    for i in 1..=n {
        schedule.push((LoadPhase::Loading, tau_max * i as f64 / n as f64));
    }
    for i in (0..n).rev() {
        schedule.push((LoadPhase::Unloading, tau_max * i as f64 / n as f64));
    }
    for i in 1..=n {
        schedule.push((LoadPhase::Loading, -tau_max * i as f64 / n as f64));
    }
    for i in (0..n).rev() {
        schedule.push((LoadPhase::Unloading, -tau_max * i as f64 / n as f64));
    }

    // Bench state: wheel angle/rate; the motor side is clamped at zero,
    // so the spring deflection is minus the wheel angle.
    let mut wheel_deg = 0.0f64;
    let mut wheel_dps = 0.0f64;
    let mut hysteresis = 0.0f64;
    let inertia = cal.wheel_inertia_kgm2;
    let damping = cal.wheel_damping_nms_per_rad;

    let hold_steps = (cal.settle_hold_s / dt).round() as u64;
    let timeout_steps = (cal.step_timeout_s / dt).round() as u64;

    let mut steps = Vec::with_capacity(schedule.len());
    for (step_index, (phase, applied)) in schedule.iter().enumerate() {
        let mut held = 0u64;
        let mut settled = false;
        for _ in 0..timeout_steps {
            let deflection = -wheel_deg;
            let deflection_rate = -wheel_dps;
            let (transmitted, new_h) =
                spring_torque(deflection, deflection_rate, dt, params, hysteresis);
            hysteresis = new_h;
            // Spring torque on the joint side acts on the wheel with the
            // deflection sign; positive applied torque winds the wheel up.
            let accel_radps2 =
                (applied + transmitted - damping * wheel_dps * DEG_TO_RAD) / inertia;
            wheel_dps += accel_radps2 / DEG_TO_RAD * dt;
            wheel_deg += wheel_dps * dt;

            if wheel_dps.abs() < cal.settle_rate_dps {
                held += 1;
                if held >= hold_steps {
                    settled = true;
                    break;
                }
            } else {
                held = 0;
            }
        }
        if !settled {
            return Err(ExperimentError::NonSettling {
                step: step_index,
                timeout_s: cal.step_timeout_s,
                rate_dps: cal.settle_rate_dps,
            });
        }
        steps.push(CalibrationStep {
            phase: *phase,
            applied_nm: *applied,
            deflection_deg: wheel_deg,
        });
    }

    let branch = |phase: LoadPhase| {
        let xs: Vec<f64> = steps
            .iter()
            .filter(|s| s.phase == phase)
            .map(|s| s.deflection_deg)
            .collect();
        let ys: Vec<f64> = steps
            .iter()
            .filter(|s| s.phase == phase)
            .map(|s| s.applied_nm)
            .collect();
        linear_fit(&xs, &ys)
    };
    let (k_loading, _, r2_loading) = branch(LoadPhase::Loading);
    let (k_unloading, _, r2_unloading) = branch(LoadPhase::Unloading);

    Ok(CalibrationRecord {
        loop_area_nm_deg: shoelace_area(&steps),
        steps,
        fitted_k_loading: k_loading,
        fitted_k_unloading: k_unloading,
        r_squared: r2_loading.min(r2_unloading),
    })
}
