//! Planar dynamics simulator and experiment harness for a bidirectional
//! series elastic actuator (SEA) and a single-legged hopping robot built
//! from three of them.
//!
//! The crate models one SEA unit (torsion spring with hard stops and
//! friction hysteresis, DC motor torque envelope, gearbox backlash and
//! back-drive friction, quantized angle sensing) and a Body-Hip-Knee-Ankle
//! leg on a vertical slider with two-point compliant ground contact. On
//! top of the physics sit four scripted experiment protocols — spring
//! calibration, natural-frequency measurement, drop tests, and a parameter
//! sweep runner — plus signal analysis for the derived metrics (dominant
//! frequency, peak and integrated current, settling time, touchdown
//! detection, hop periodicity).
//!
//! Everything is deterministic: fixed-step semi-implicit Euler, no global
//! state, no hidden randomness. Identical configurations produce
//! bit-identical traces.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod contact;
pub mod control;
pub mod experiments;
pub mod robot;
pub mod sea;
pub mod trace_io;
pub mod units;
pub mod world;

pub use analysis::{MetricsReport, Trace};
pub use config::{load_config, ConfigError, LoadedConfig};
pub use contact::ContactParams;
pub use control::{ControllerConfig, PdGains};
pub use experiments::{CalibrationRecord, ExperimentConfig, Protocol};
pub use robot::{Joint, JointMap, RobotModel};
pub use sea::{SeaParams, SeaState, SpringMode};
pub use world::{SimFault, World, WorldState};
