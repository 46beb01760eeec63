//! Scripted experiment protocols: spring calibration, natural-frequency
//! measurement, drop tests (landing and hopping), and a parameter sweep
//! runner.

mod calibration;
mod natural_freq;
mod sweep;

pub use calibration::{run_spring_calibration, CalibrationRecord, CalibrationStep, LoadPhase};
pub use drop_test::run_drop_test;
pub use natural_freq::run_natural_frequency;
pub use sweep::{run_sweep, SweepCell, SweepOutcome, SweepReport};

use serde::{Deserialize, Serialize};

use crate::contact::ContactParams;
use crate::control::ControllerConfig;
use crate::robot::{Joint, JointMap, RobotModel};
use crate::sea::{SeaParams, SpringMode};
use crate::world::SimFault;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    SpringCal,
    NaturalFreq,
    #[default]
    DropTest,
    Sweep,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::SpringCal => "spring_cal",
            Protocol::NaturalFreq => "natural_freq",
            Protocol::DropTest => "drop_test",
            Protocol::Sweep => "sweep",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Fault(#[from] SimFault),
    #[error("load step {step} did not settle within {timeout_s} s (rate criterion {rate_dps} deg/s)")]
    NonSettling { step: usize, timeout_s: f64, rate_dps: f64 },
    #[error("impulse too small to excite the joint: peak excursion {peak_deg:.4}° < {required_deg:.4}°")]
    InsufficientExcitation { peak_deg: f64, required_deg: f64 },
    #[error("no dominant frequency found in the response")]
    NoDominantFrequency,
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}

/// Spring calibration protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringCalSettings {
    /// Unit under test.
    pub joint: Joint,
    /// Peak applied torque; defaults to spring_k·travel when absent (N·m).
    pub max_torque_nm: Option<f64>,
    pub steps_per_quadrant: u32,
    /// Settling criterion: |rate| below this ... (deg/s)
    pub settle_rate_dps: f64,
    /// ... sustained for this long (s).
    pub settle_hold_s: f64,
    /// Per-step timeout before declaring a non-settling fault (s).
    pub step_timeout_s: f64,
    /// Output wheel inertia of the measurement fixture (kg·m²).
    pub wheel_inertia_kgm2: f64,
    /// Viscous damping of the fixture bearing (N·m·s/rad), chosen
    /// overdamped so each load step approaches monotonically.
    pub wheel_damping_nms_per_rad: f64,
}

impl Default for SpringCalSettings {
    fn default() -> Self {
        Self {
            joint: Joint::Knee,
            max_torque_nm: None,
            steps_per_quadrant: 20,
            settle_rate_dps: 0.05,
            settle_hold_s: 0.2,
            step_timeout_s: 5.0,
            wheel_inertia_kgm2: 2.0e-4,
            // Slightly overdamped for the default springs: each load step
            // approaches its equilibrium monotonically and the residual
            // creep at the settle threshold stays far below the sensor
            // resolution.
            wheel_damping_nms_per_rad: 0.03,
        }
    }
}

/// Natural-frequency protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalFreqSettings {
    /// Joint to excite; the CLI flag overrides this.
    pub joint: Option<Joint>,
    /// Flick standardization: torque impulse magnitude and duration.
    pub impulse_nm: f64,
    pub impulse_duration_s: f64,
    /// When set, replace the robot by a single point inertia on the
    /// spring (reduced model) (kg·m²).
    pub reduced_inertia_kgm2: Option<f64>,
    /// Pose held by the frozen joints during the measurement (deg).
    pub pose_deg: JointMap<f64>,
}

impl Default for NaturalFreqSettings {
    fn default() -> Self {
        Self {
            joint: None,
            impulse_nm: 0.1,
            impulse_duration_s: 0.010,
            reduced_inertia_kgm2: None,
            pose_deg: JointMap::uniform(0.0),
        }
    }
}

/// Sweep cell override: dotted config key → value.
pub type Overrides = std::collections::BTreeMap<String, toml::Value>;

/// Sweep protocol settings: an optional cartesian grid plus explicit
/// cells, all applied on top of the base configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Dotted key → list of values; cells are the cartesian product in
    /// sorted key order.
    pub grid: std::collections::BTreeMap<String, Vec<toml::Value>>,
    /// Explicit override sets appended after the grid cells.
    pub cells: Vec<Overrides>,
    /// Protocol run per cell.
    pub protocol: Protocol,
}

/// Output settings: default directory for files when the CLI `--out`
/// flag is omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: Option<String>,
}

/// Fully resolved experiment configuration: protocol selection plus the
/// whole physical parameter bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub drop_height_m: f64,
    pub initial_pose_deg: JointMap<f64>,
    pub spring_mode: JointMap<SpringMode>,
    pub duration_s: f64,
    pub physics_dt_s: f64,
    pub sample_rate_hz: f64,
    /// Reserved for future stochastic protocols; the shipped protocols
    /// are fully deterministic.
    pub seed: u64,
    pub controller: ControllerConfig,
    pub robot: RobotModel,
    pub sea: JointMap<SeaParams>,
    pub contact: ContactParams,
    pub spring_cal: SpringCalSettings,
    pub natural_freq: NaturalFreqSettings,
    pub sweep: SweepSettings,
    pub output: OutputSettings,
}

impl ExperimentConfig {
    /// Defaults for a given protocol. Drop tests lock the hip spring;
    /// everything else starts from the measured-unit defaults.
    pub fn defaults(protocol: Protocol) -> Self {
        let spring_mode = match protocol {
            Protocol::DropTest | Protocol::Sweep => JointMap {
                hip: SpringMode::Locked,
                knee: SpringMode::Active,
                ankle: SpringMode::Active,
            },
            _ => JointMap::uniform(SpringMode::Active),
        };
        Self {
            protocol,
            drop_height_m: 0.070,
            initial_pose_deg: JointMap::uniform(0.0),
            spring_mode,
            duration_s: match protocol {
                Protocol::NaturalFreq => 4.0,
                _ => 1.5,
            },
            physics_dt_s: 1e-4,
            sample_rate_hz: 1000.0,
            seed: 0,
            controller: ControllerConfig::default(),
            robot: RobotModel::default(),
            sea: JointMap::uniform(SeaParams::measured()),
            contact: ContactParams::default(),
            spring_cal: SpringCalSettings::default(),
            natural_freq: NaturalFreqSettings::default(),
            sweep: SweepSettings {
                protocol: Protocol::DropTest,
                ..Default::default()
            },
            output: OutputSettings::default(),
        }
    }

    /// Physics substeps per control tick; validated to be integral.
    pub fn substeps_per_tick(&self) -> u64 {
        (1.0 / (self.controller.rate_hz * self.physics_dt_s)).round() as u64
    }

    /// Physics substeps per recorded sample; validated to be integral.
    pub fn substeps_per_sample(&self) -> u64 {
        (1.0 / (self.sample_rate_hz * self.physics_dt_s)).round() as u64
    }

    pub fn total_substeps(&self) -> u64 {
        (self.duration_s / self.physics_dt_s).round() as u64
    }
}
