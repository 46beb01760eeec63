//! Per-joint PD position control producing current commands at a fixed
//! control rate with zero-order hold.
//!
//! The controller reads quantized sensor angles, differentiates them with
//! a first-order low-pass filter for the D term, and saturates the output
//! at the configured current limit. Commands are held constant between
//! ticks.

use serde::{Deserialize, Serialize};

use crate::robot::{Joint, JointMap};
use crate::sea::{sensor_read, SeaParams, SeaState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    /// Proportional gain (A/deg).
    pub kp_a_per_deg: f64,
    /// Derivative gain (A per deg/s).
    pub kd_a_per_dps: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp_a_per_deg: 0.0,
            kd_a_per_dps: 0.0,
        }
    }
}

/// Which side of the spring feeds the position loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    /// Sensor A: actuator output angle. The spring deforms passively
    /// around the held actuator position.
    MotorSensor,
    /// Sensor B: joint angle.
    JointSensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub rate_hz: f64,
    pub current_limit_a: f64,
    pub feedback: FeedbackSource,
    /// Cutoff of the derivative low-pass filter (Hz).
    pub d_cutoff_hz: f64,
    pub gains: JointMap<PdGains>,
    pub targets_deg: JointMap<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            rate_hz: 1000.0,
            current_limit_a: 2.0,
            feedback: FeedbackSource::MotorSensor,
            d_cutoff_hz: 50.0,
            gains: JointMap::uniform(PdGains::default()),
            targets_deg: JointMap::uniform(0.0),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self, stall_current_a: f64) -> Result<(), (String, String)> {
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err(("rate_hz".into(), format!("must be > 0, got {}", self.rate_hz)));
        }
        if !(self.current_limit_a > 0.0) || self.current_limit_a > stall_current_a + 1e-12 {
            return Err((
                "current_limit_a".into(),
                format!(
                    "must be in (0, {stall_current_a:.4}] (stall current), got {}",
                    self.current_limit_a
                ),
            ));
        }
        if !(self.d_cutoff_hz > 0.0) {
            return Err(("d_cutoff_hz".into(), format!("must be > 0, got {}", self.d_cutoff_hz)));
        }
        for j in Joint::ALL {
            let g = self.gains[j];
            if !(g.kp_a_per_deg >= 0.0) || !g.kp_a_per_deg.is_finite() {
                return Err((format!("{j}.kp"), format!("must be >= 0, got {}", g.kp_a_per_deg)));
            }
            if !(g.kd_a_per_dps >= 0.0) || !g.kd_a_per_dps.is_finite() {
                return Err((format!("{j}.kd"), format!("must be >= 0, got {}", g.kd_a_per_dps)));
            }
        }
        Ok(())
    }
}

/// PD law with saturation: `i = clamp(kp·(target − angle) − kd·rate)`.
pub fn pd_command(
    target_deg: f64,
    measured_angle_deg: f64,
    measured_rate_dps: f64,
    gains: &PdGains,
    current_limit_a: f64,
) -> f64 {
    let raw = gains.kp_a_per_deg * (target_deg - measured_angle_deg)
        - gains.kd_a_per_dps * measured_rate_dps;
    raw.clamp(-current_limit_a, current_limit_a)
}

/// Quantized sensor snapshot taken at a control tick.
#[derive(Debug, Clone, Copy)]
pub struct SensorSnapshot {
    pub angles_deg: JointMap<f64>,
}

impl SensorSnapshot {
    /// Read the configured feedback sensor of every unit.
    pub fn take(
        feedback: FeedbackSource,
        sea_state: &JointMap<SeaState>,
        sea_params: &JointMap<SeaParams>,
    ) -> Self {
        let angles_deg = JointMap::from_fn(|j| {
            let true_angle = match feedback {
                FeedbackSource::MotorSensor => sea_state[j].motor_angle_deg,
                FeedbackSource::JointSensor => sea_state[j].joint_angle_deg,
            };
            sensor_read(true_angle, &sea_params[j])
        });
        Self { angles_deg }
    }
}

/// Discrete PD controller with one derivative filter per joint.
#[derive(Debug, Clone)]
pub struct Controller {
    pub config: ControllerConfig,
    prev_angle_deg: JointMap<Option<f64>>,
    rate_filtered_dps: JointMap<f64>,
    held_a: JointMap<f64>,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        Self {
            config,
            prev_angle_deg: JointMap::uniform(None),
            rate_filtered_dps: JointMap::uniform(0.0),
            held_a: JointMap::uniform(0.0),
        }
    }

    pub fn tick_period_s(&self) -> f64 {
        1.0 / self.config.rate_hz
    }

    /// Run one control tick and return the commands held until the next
    /// tick (A).
    pub fn tick(&mut self, snapshot: &SensorSnapshot) -> JointMap<f64> {
        let dt = self.tick_period_s();
        let rc = 1.0 / (2.0 * std::f64::consts::PI * self.config.d_cutoff_hz);
        let alpha = dt / (dt + rc);
        for j in Joint::ALL {
            let angle = snapshot.angles_deg[j];
            let raw_rate = match self.prev_angle_deg[j] {
                Some(prev) => (angle - prev) / dt,
                None => 0.0,
            };
            self.prev_angle_deg[j] = Some(angle);
            self.rate_filtered_dps[j] += alpha * (raw_rate - self.rate_filtered_dps[j]);
            self.held_a[j] = pd_command(
                self.config.targets_deg[j],
                angle,
                self.rate_filtered_dps[j],
                &self.config.gains[j],
                self.config.current_limit_a,
            );
        }
        self.held_a
    }

    /// Commands from the most recent tick.
    pub fn held(&self) -> JointMap<f64> {
        self.held_a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gains(kp: f64, kd: f64) -> PdGains {
        PdGains { kp_a_per_deg: kp, kd_a_per_dps: kd }
    }

    #[test]
    fn zero_error_zero_rate_zero_command() {
        assert_eq!(pd_command(10.0, 10.0, 0.0, &gains(0.5, 0.1), 2.0), 0.0);
    }

    #[test]
    fn proportional_term_scales_error() {
        let i = pd_command(10.0, 0.0, 0.0, &gains(0.05, 0.0), 2.0);
        assert!((i - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturation_at_current_limit() {
        assert_eq!(pd_command(1e6, 0.0, 0.0, &gains(1.0, 0.0), 2.0), 2.0);
        assert_eq!(pd_command(-1e6, 0.0, 0.0, &gains(1.0, 0.0), 2.0), -2.0);
    }

    #[test]
    fn derivative_term_opposes_rate() {
        let i = pd_command(0.0, 0.0, 100.0, &gains(0.0, 0.01), 2.0);
        assert!((i - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn first_tick_has_no_derivative_kick() {
        let mut config = ControllerConfig::default();
        config.gains = JointMap::uniform(gains(0.0, 1.0));
        let mut c = Controller::new(config);
        let snap = SensorSnapshot { angles_deg: JointMap::uniform(25.0) };
        let out = c.tick(&snap);
        for j in Joint::ALL {
            assert_eq!(out[j], 0.0);
        }
    }

    #[test]
    fn filtered_rate_converges_to_slope() {
        let mut config = ControllerConfig::default();
        config.gains = JointMap::uniform(gains(0.0, 1.0));
        config.current_limit_a = 2.0;
        let mut c = Controller::new(config);
        // Constant slope 10 deg/s sampled at 1 kHz; after many ticks the
        // filtered rate approaches the true slope.
        let mut out = JointMap::uniform(0.0);
        for k in 0..500 {
            let angle = 10.0 * (k as f64) * 1e-3;
            out = c.tick(&SensorSnapshot { angles_deg: JointMap::uniform(angle) });
        }
        for j in Joint::ALL {
            assert!((out[j] - (-2.0)).abs() < 1e-9 || (out[j] + 10.0 * 1.0).abs() < 0.5);
        }
        // kd = 1 A/(deg/s) and rate 10 deg/s saturates at the limit.
        assert_eq!(out.hip, -2.0);
    }

    proptest! {
        #[test]
        fn command_always_within_limit(
            target in -200.0f64..200.0,
            angle in -200.0f64..200.0,
            rate in -2000.0f64..2000.0,
            kp in 0.0f64..1.0,
            kd in 0.0f64..0.1,
            limit in 0.1f64..2.77,
        ) {
            let i = pd_command(target, angle, rate, &gains(kp, kd), limit);
            prop_assert!(i.abs() <= limit);
        }

        #[test]
        fn command_linear_in_error_before_saturation(
            error in -5.0f64..5.0,
            kp in 0.001f64..0.05,
        ) {
            let g = gains(kp, 0.0);
            let one = pd_command(error, 0.0, 0.0, &g, 1e9);
            let two = pd_command(2.0 * error, 0.0, 0.0, &g, 1e9);
            prop_assert!((two - 2.0 * one).abs() < 1e-9);
        }
    }
}
