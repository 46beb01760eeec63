//! Configuration loading, validation, and dumping.
//!
//! The surface syntax is TOML; the contract is the key list and units
//! (see the README). Unknown keys are rejected naming the offending key,
//! all physical values are bounds-checked on load, and every applied
//! default is echoed in a provenance log.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use toml::Value;

use crate::contact::ContactParams;
use crate::control::{ControllerConfig, FeedbackSource, PdGains};
use crate::experiments::{
    ExperimentConfig, NaturalFreqSettings, Overrides, Protocol, SpringCalSettings, SweepSettings,
};
use crate::robot::{Joint, JointMap, RobotModel};
use crate::sea::{SeaParams, SpringMode};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {message}")]
    Parse { message: String },
    #[error("invalid {key}: {message}")]
    Validation { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Validation { key: key.into(), message: message.into() }
    }
}

/// A loaded configuration: the raw document (kept for sweep overlays),
/// the resolved experiment configuration, and the provenance log of every
/// applied default.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub raw: toml::Table,
    pub config: ExperimentConfig,
    pub provenance: Vec<String>,
}

// ---------------------------------------------------------------------------
// Raw document schema (everything optional, unknown keys rejected)
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    robot: Option<RawRobot>,
    sea: Option<RawSeaSection>,
    contact: Option<RawContact>,
    control: Option<RawControl>,
    experiment: Option<RawExperiment>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    gravity_mps2: Option<f64>,
    limit_stiffness_nm_per_deg: Option<f64>,
    limit_damping_nms_per_deg: Option<f64>,
    body: Option<RawBody>,
    hip: Option<RawLink>,
    knee: Option<RawLink>,
    ankle: Option<RawLink>,
    foot: Option<RawFoot>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBody {
    mass_kg: Option<f64>,
    com_height_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    mass_kg: Option<f64>,
    length_m: Option<f64>,
    com_offset_m: Option<f64>,
    inertia_kgm2: Option<f64>,
    limit_deg: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFoot {
    heel_x_m: Option<f64>,
    toe_x_m: Option<f64>,
    sole_drop_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeaSection {
    hip: Option<RawSea>,
    knee: Option<RawSea>,
    ankle: Option<RawSea>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSea {
    torque_constant_nm_per_a: Option<f64>,
    stall_torque_nm: Option<f64>,
    no_load_speed_rpm: Option<f64>,
    gear_ratio: Option<f64>,
    backlash_deg: Option<f64>,
    back_drive_torque_nm: Option<f64>,
    spring_preset: Option<String>,
    spring_k_nm_per_deg: Option<f64>,
    spring_travel_deg: Option<f64>,
    stop_stiffness_nm_per_deg: Option<f64>,
    stop_damping_nms_per_deg: Option<f64>,
    hysteresis_torque_nm: Option<f64>,
    reflected_inertia_kgm2: Option<f64>,
    motor_damping_nms_per_rad: Option<f64>,
    sensor_resolution_deg: Option<f64>,
    ideal_sensor: Option<bool>,
    spring_mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawContact {
    normal_stiffness_n_per_m: Option<f64>,
    normal_damping_ns_per_m: Option<f64>,
    friction_mu: Option<f64>,
    tangential_reg_velocity_mps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    rate_hz: Option<f64>,
    current_limit_a: Option<f64>,
    feedback: Option<String>,
    d_cutoff_hz: Option<f64>,
    hip: Option<RawPd>,
    knee: Option<RawPd>,
    ankle: Option<RawPd>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPd {
    kp: Option<f64>,
    kd: Option<f64>,
    target_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    protocol: Option<String>,
    drop_height_m: Option<f64>,
    duration_s: Option<f64>,
    physics_dt_s: Option<f64>,
    sample_rate_hz: Option<f64>,
    seed: Option<u64>,
    initial_pose_deg: Option<RawPose>,
    spring_cal: Option<RawSpringCal>,
    natural_freq: Option<RawNaturalFreq>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    hip: Option<f64>,
    knee: Option<f64>,
    ankle: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpringCal {
    joint: Option<String>,
    max_torque_nm: Option<f64>,
    steps_per_quadrant: Option<u32>,
    settle_rate_dps: Option<f64>,
    settle_hold_s: Option<f64>,
    step_timeout_s: Option<f64>,
    wheel_inertia_kgm2: Option<f64>,
    wheel_damping_nms_per_rad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNaturalFreq {
    joint: Option<String>,
    impulse_nm: Option<f64>,
    impulse_duration_s: Option<f64>,
    reduced_inertia_kgm2: Option<f64>,
    pose_deg: Option<RawPose>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    protocol: Option<String>,
    grid: Option<BTreeMap<String, Vec<Value>>>,
    cells: Option<Vec<BTreeMap<String, Value>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

// ---------------------------------------------------------------------------
// Resolution with provenance
// ---------------------------------------------------------------------------

struct Resolver {
    log: Vec<String>,
}

impl Resolver {
    fn get<T: Clone + std::fmt::Debug>(&mut self, value: Option<T>, default: T, key: &str) -> T {
        match value {
            Some(v) => v,
            None => {
                self.log.push(format!("{key} = {default:?} (default)"));
                default
            }
        }
    }

    fn quiet<T>(&mut self, value: Option<T>, default: T) -> T {
        value.unwrap_or(default)
    }
}

fn parse_joint(name: &str, key: &str) -> Result<Joint, ConfigError> {
    Joint::parse(name)
        .ok_or_else(|| ConfigError::invalid(key, format!("expected hip|knee|ankle, got {name:?}")))
}

fn parse_protocol(name: &str, key: &str) -> Result<Protocol, ConfigError> {
    match name {
        "spring_cal" => Ok(Protocol::SpringCal),
        "natural_freq" => Ok(Protocol::NaturalFreq),
        "drop_test" => Ok(Protocol::DropTest),
        "sweep" => Ok(Protocol::Sweep),
        other => Err(ConfigError::invalid(
            key,
            format!("expected spring_cal|natural_freq|drop_test|sweep, got {other:?}"),
        )),
    }
}

fn parse_spring_mode(name: &str, key: &str) -> Result<SpringMode, ConfigError> {
    match name {
        "active" => Ok(SpringMode::Active),
        "locked" => Ok(SpringMode::Locked),
        other => Err(ConfigError::invalid(key, format!("expected active|locked, got {other:?}"))),
    }
}

fn resolve_sea(
    raw: Option<RawSea>,
    joint: Joint,
    protocol_default_mode: SpringMode,
    r: &mut Resolver,
) -> Result<(SeaParams, SpringMode), ConfigError> {
    let raw = raw.unwrap_or_default();
    let prefix = format!("sea.{joint}");

    let preset_key = format!("{prefix}.spring_preset");
    let preset = match raw.spring_preset.as_deref() {
        None => {
            r.log.push(format!("{preset_key} = \"measured\" (default)"));
            SeaParams::measured()
        }
        Some("measured") => SeaParams::measured(),
        Some("design") => SeaParams::design(),
        Some(other) => {
            return Err(ConfigError::invalid(
                preset_key,
                format!("expected measured|design, got {other:?}"),
            ))
        }
    };

    let mut p = preset.clone();
    let f = |value: Option<f64>, default: f64, field: &str, r: &mut Resolver| {
        r.get(value, default, &format!("{prefix}.{field}"))
    };
    p.torque_constant_nm_per_a = f(raw.torque_constant_nm_per_a, preset.torque_constant_nm_per_a, "torque_constant_nm_per_a", r);
    p.stall_torque_nm = f(raw.stall_torque_nm, preset.stall_torque_nm, "stall_torque_nm", r);
    p.no_load_speed_rpm = f(raw.no_load_speed_rpm, preset.no_load_speed_rpm, "no_load_speed_rpm", r);
    p.gear_ratio = f(raw.gear_ratio, preset.gear_ratio, "gear_ratio", r);
    p.backlash_deg = f(raw.backlash_deg, preset.backlash_deg, "backlash_deg", r);
    p.back_drive_torque_nm = f(raw.back_drive_torque_nm, preset.back_drive_torque_nm, "back_drive_torque_nm", r);
    p.spring_k_nm_per_deg = f(raw.spring_k_nm_per_deg, preset.spring_k_nm_per_deg, "spring_k_nm_per_deg", r);
    p.spring_travel_deg = f(raw.spring_travel_deg, preset.spring_travel_deg, "spring_travel_deg", r);
    p.stop_stiffness_nm_per_deg = f(raw.stop_stiffness_nm_per_deg, preset.stop_stiffness_nm_per_deg, "stop_stiffness_nm_per_deg", r);
    p.stop_damping_nms_per_deg = f(raw.stop_damping_nms_per_deg, preset.stop_damping_nms_per_deg, "stop_damping_nms_per_deg", r);
    p.hysteresis_torque_nm = f(raw.hysteresis_torque_nm, preset.hysteresis_torque_nm, "hysteresis_torque_nm", r);
    p.reflected_inertia_kgm2 = f(raw.reflected_inertia_kgm2, preset.reflected_inertia_kgm2, "reflected_inertia_kgm2", r);
    p.motor_damping_nms_per_rad = f(raw.motor_damping_nms_per_rad, preset.motor_damping_nms_per_rad, "motor_damping_nms_per_rad", r);
    p.sensor_resolution_deg = f(raw.sensor_resolution_deg, preset.sensor_resolution_deg, "sensor_resolution_deg", r);
    p.ideal_sensor = r.get(raw.ideal_sensor, false, &format!("{prefix}.ideal_sensor"));

    let mode = match raw.spring_mode.as_deref() {
        Some(name) => parse_spring_mode(name, &format!("{prefix}.spring_mode"))?,
        None => {
            r.log.push(format!(
                "{prefix}.spring_mode = {:?} (protocol default)",
                protocol_default_mode
            ));
            protocol_default_mode
        }
    };

    p.validate()
        .map_err(|(field, message)| ConfigError::invalid(format!("{prefix}.{field}"), message))?;
    Ok((p, mode))
}

fn resolve_link(
    raw: Option<RawLink>,
    joint: Joint,
    defaults: &RobotModel,
    r: &mut Resolver,
) -> (crate::robot::LinkParams, [f64; 2]) {
    let raw = raw.unwrap_or_default();
    let prefix = format!("robot.{joint}");
    let d = defaults.links[joint];
    let mass = r.get(raw.mass_kg, d.mass_kg, &format!("{prefix}.mass_kg"));
    let length = r.get(raw.length_m, d.length_m, &format!("{prefix}.length_m"));
    // Geometry-derived defaults follow an overridden length.
    let com = match raw.com_offset_m {
        Some(v) => v,
        None => {
            let v = length / 2.0;
            r.log.push(format!("{prefix}.com_offset_m = {v:?} (default: length/2)"));
            v
        }
    };
    let inertia = match raw.inertia_kgm2 {
        Some(v) => v,
        None => {
            let v = mass * length * length / 12.0;
            r.log.push(format!("{prefix}.inertia_kgm2 = {v:?} (default: rod m·L²/12)"));
            v
        }
    };
    let limits = r.get(
        raw.limit_deg,
        defaults.joint_limits_deg[joint],
        &format!("{prefix}.limit_deg"),
    );
    (
        crate::robot::LinkParams {
            mass_kg: mass,
            length_m: length,
            com_offset_m: com,
            inertia_kgm2: inertia,
        },
        limits,
    )
}

fn resolve_pose(raw: Option<RawPose>, key: &str, r: &mut Resolver) -> JointMap<f64> {
    let raw = raw.unwrap_or_default();
    JointMap {
        hip: r.get(raw.hip, 0.0, &format!("{key}.hip")),
        knee: r.get(raw.knee, 0.0, &format!("{key}.knee")),
        ankle: r.get(raw.ankle, 0.0, &format!("{key}.ankle")),
    }
}

/// Resolve a raw TOML document into a validated configuration plus the
/// provenance log of applied defaults.
pub fn resolve_document(raw: &toml::Table) -> Result<(ExperimentConfig, Vec<String>), ConfigError> {
    let doc: RawDoc = RawDoc::deserialize(Value::Table(raw.clone()))
        .map_err(|e| ConfigError::Parse { message: e.to_string() })?;
    let mut r = Resolver { log: Vec::new() };

    // Protocol first: it sets per-protocol defaults.
    let raw_experiment = doc.experiment.unwrap_or_default();
    let protocol_name = raw_experiment
        .protocol
        .as_deref()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| {
            ConfigError::invalid(
                "experiment.protocol",
                "missing; expected spring_cal|natural_freq|drop_test|sweep",
            )
        })?;
    let protocol = parse_protocol(protocol_name, "experiment.protocol")?;
    let defaults = ExperimentConfig::defaults(protocol);

    // Robot.
    let raw_robot = doc.robot.unwrap_or_default();
    let model_defaults = RobotModel::default();
    let raw_body = raw_robot.body.unwrap_or_default();
    let (hip_link, hip_limits) = resolve_link(raw_robot.hip, Joint::Hip, &model_defaults, &mut r);
    let (knee_link, knee_limits) = resolve_link(raw_robot.knee, Joint::Knee, &model_defaults, &mut r);
    let (ankle_link, ankle_limits) = resolve_link(raw_robot.ankle, Joint::Ankle, &model_defaults, &mut r);
    let raw_foot = raw_robot.foot.unwrap_or_default();
    let robot = RobotModel {
        body_mass_kg: r.get(raw_body.mass_kg, model_defaults.body_mass_kg, "robot.body.mass_kg"),
        body_com_height_m: r.get(
            raw_body.com_height_m,
            model_defaults.body_com_height_m,
            "robot.body.com_height_m",
        ),
        links: JointMap { hip: hip_link, knee: knee_link, ankle: ankle_link },
        joint_limits_deg: JointMap { hip: hip_limits, knee: knee_limits, ankle: ankle_limits },
        foot: crate::robot::FootGeometry {
            heel_x_m: r.get(raw_foot.heel_x_m, model_defaults.foot.heel_x_m, "robot.foot.heel_x_m"),
            toe_x_m: r.get(raw_foot.toe_x_m, model_defaults.foot.toe_x_m, "robot.foot.toe_x_m"),
            sole_drop_m: r.get(
                raw_foot.sole_drop_m,
                model_defaults.foot.sole_drop_m,
                "robot.foot.sole_drop_m",
            ),
        },
        gravity_mps2: r.get(raw_robot.gravity_mps2, model_defaults.gravity_mps2, "robot.gravity_mps2"),
        limit_stiffness_nm_per_deg: r.get(
            raw_robot.limit_stiffness_nm_per_deg,
            model_defaults.limit_stiffness_nm_per_deg,
            "robot.limit_stiffness_nm_per_deg",
        ),
        limit_damping_nms_per_deg: r.get(
            raw_robot.limit_damping_nms_per_deg,
            model_defaults.limit_damping_nms_per_deg,
            "robot.limit_damping_nms_per_deg",
        ),
    };
    robot
        .validate()
        .map_err(|(field, message)| ConfigError::invalid(format!("robot.{field}"), message))?;

    // Actuators.
    let raw_sea = doc.sea.unwrap_or_default();
    let (hip_sea, hip_mode) = resolve_sea(raw_sea.hip, Joint::Hip, defaults.spring_mode.hip, &mut r)?;
    let (knee_sea, knee_mode) = resolve_sea(raw_sea.knee, Joint::Knee, defaults.spring_mode.knee, &mut r)?;
    let (ankle_sea, ankle_mode) = resolve_sea(raw_sea.ankle, Joint::Ankle, defaults.spring_mode.ankle, &mut r)?;
    let sea = JointMap { hip: hip_sea, knee: knee_sea, ankle: ankle_sea };
    let spring_mode = JointMap { hip: hip_mode, knee: knee_mode, ankle: ankle_mode };

    // Contact.
    let raw_contact = doc.contact.unwrap_or_default();
    let contact_defaults = ContactParams::default();
    let contact = ContactParams {
        normal_stiffness_n_per_m: r.get(
            raw_contact.normal_stiffness_n_per_m,
            contact_defaults.normal_stiffness_n_per_m,
            "contact.normal_stiffness_n_per_m",
        ),
        normal_damping_ns_per_m: r.get(
            raw_contact.normal_damping_ns_per_m,
            contact_defaults.normal_damping_ns_per_m,
            "contact.normal_damping_ns_per_m",
        ),
        friction_mu: r.get(raw_contact.friction_mu, contact_defaults.friction_mu, "contact.friction_mu"),
        tangential_reg_velocity_mps: r.get(
            raw_contact.tangential_reg_velocity_mps,
            contact_defaults.tangential_reg_velocity_mps,
            "contact.tangential_reg_velocity_mps",
        ),
    };
    contact
        .validate()
        .map_err(|(field, message)| ConfigError::invalid(format!("contact.{field}"), message))?;

    // Experiment scalars.
    let drop_height_m = r.get(raw_experiment.drop_height_m, defaults.drop_height_m, "experiment.drop_height_m");
    let duration_s = r.get(raw_experiment.duration_s, defaults.duration_s, "experiment.duration_s");
    let physics_dt_s = r.get(raw_experiment.physics_dt_s, defaults.physics_dt_s, "experiment.physics_dt_s");
    let sample_rate_hz = r.get(raw_experiment.sample_rate_hz, defaults.sample_rate_hz, "experiment.sample_rate_hz");
    let seed = r.get(raw_experiment.seed, defaults.seed, "experiment.seed");
    let initial_pose_deg = resolve_pose(raw_experiment.initial_pose_deg, "experiment.initial_pose_deg", &mut r);

    // Controller; targets default to the initial pose (posture hold).
    let raw_control = doc.control.unwrap_or_default();
    let control_defaults = ControllerConfig::default();
    let feedback = match raw_control.feedback.as_deref() {
        None => {
            r.log.push("control.feedback = \"motor\" (default)".into());
            FeedbackSource::MotorSensor
        }
        Some("motor") => FeedbackSource::MotorSensor,
        Some("joint") => FeedbackSource::JointSensor,
        Some(other) => {
            return Err(ConfigError::invalid(
                "control.feedback",
                format!("expected motor|joint, got {other:?}"),
            ))
        }
    };
    let mut gains = JointMap::uniform(PdGains::default());
    let mut targets = JointMap::uniform(0.0);
    let raw_pd = JointMap {
        hip: raw_control.hip.unwrap_or_default(),
        knee: raw_control.knee.unwrap_or_default(),
        ankle: raw_control.ankle.unwrap_or_default(),
    };
    for j in Joint::ALL {
        let pd = &raw_pd[j];
        gains[j] = PdGains {
            kp_a_per_deg: r.get(pd.kp, 0.0, &format!("control.{j}.kp")),
            kd_a_per_dps: r.get(pd.kd, 0.0, &format!("control.{j}.kd")),
        };
        targets[j] = match pd.target_deg {
            Some(v) => v,
            None => {
                let v = initial_pose_deg[j];
                r.log.push(format!("control.{j}.target_deg = {v:?} (default: initial pose)"));
                v
            }
        };
    }
    let controller = ControllerConfig {
        rate_hz: r.get(raw_control.rate_hz, control_defaults.rate_hz, "control.rate_hz"),
        current_limit_a: r.get(
            raw_control.current_limit_a,
            control_defaults.current_limit_a,
            "control.current_limit_a",
        ),
        feedback,
        d_cutoff_hz: r.get(raw_control.d_cutoff_hz, control_defaults.d_cutoff_hz, "control.d_cutoff_hz"),
        gains,
        targets_deg: targets,
    };
    let min_stall = Joint::ALL
        .iter()
        .map(|&j| sea[j].stall_current_a())
        .fold(f64::INFINITY, f64::min);
    controller
        .validate(min_stall)
        .map_err(|(field, message)| ConfigError::invalid(format!("control.{field}"), message))?;

    // Protocol sub-blocks.
    let raw_cal = raw_experiment.spring_cal.unwrap_or_default();
    let cal_defaults = SpringCalSettings::default();
    let spring_cal = SpringCalSettings {
        joint: match raw_cal.joint.as_deref() {
            Some(name) => parse_joint(name, "experiment.spring_cal.joint")?,
            None => {
                r.log.push("experiment.spring_cal.joint = \"knee\" (default)".into());
                cal_defaults.joint
            }
        },
        max_torque_nm: raw_cal.max_torque_nm,
        steps_per_quadrant: r.get(
            raw_cal.steps_per_quadrant,
            cal_defaults.steps_per_quadrant,
            "experiment.spring_cal.steps_per_quadrant",
        ),
        settle_rate_dps: r.get(
            raw_cal.settle_rate_dps,
            cal_defaults.settle_rate_dps,
            "experiment.spring_cal.settle_rate_dps",
        ),
        settle_hold_s: r.get(
            raw_cal.settle_hold_s,
            cal_defaults.settle_hold_s,
            "experiment.spring_cal.settle_hold_s",
        ),
        step_timeout_s: r.get(
            raw_cal.step_timeout_s,
            cal_defaults.step_timeout_s,
            "experiment.spring_cal.step_timeout_s",
        ),
        wheel_inertia_kgm2: r.get(
            raw_cal.wheel_inertia_kgm2,
            cal_defaults.wheel_inertia_kgm2,
            "experiment.spring_cal.wheel_inertia_kgm2",
        ),
        wheel_damping_nms_per_rad: r.get(
            raw_cal.wheel_damping_nms_per_rad,
            cal_defaults.wheel_damping_nms_per_rad,
            "experiment.spring_cal.wheel_damping_nms_per_rad",
        ),
    };

    let raw_nf = raw_experiment.natural_freq.unwrap_or_default();
    let nf_defaults = NaturalFreqSettings::default();
    let natural_freq = NaturalFreqSettings {
        joint: match raw_nf.joint.as_deref() {
            Some(name) => Some(parse_joint(name, "experiment.natural_freq.joint")?),
            None => None,
        },
        impulse_nm: r.get(raw_nf.impulse_nm, nf_defaults.impulse_nm, "experiment.natural_freq.impulse_nm"),
        impulse_duration_s: r.get(
            raw_nf.impulse_duration_s,
            nf_defaults.impulse_duration_s,
            "experiment.natural_freq.impulse_duration_s",
        ),
        reduced_inertia_kgm2: raw_nf.reduced_inertia_kgm2,
        pose_deg: resolve_pose(raw_nf.pose_deg, "experiment.natural_freq.pose_deg", &mut r),
    };

    let raw_sweep = raw_experiment.sweep.unwrap_or_default();
    let sweep = SweepSettings {
        protocol: match raw_sweep.protocol.as_deref() {
            Some(name) => parse_protocol(name, "experiment.sweep.protocol")?,
            None => Protocol::DropTest,
        },
        grid: r.quiet(raw_sweep.grid, BTreeMap::new()),
        cells: r
            .quiet(raw_sweep.cells, Vec::new())
            .into_iter()
            .map(|m| m.into_iter().collect::<Overrides>())
            .collect(),
    };

    let output = crate::experiments::OutputSettings {
        dir: doc.output.unwrap_or_default().dir,
    };

    let config = ExperimentConfig {
        protocol,
        drop_height_m,
        initial_pose_deg,
        spring_mode,
        duration_s,
        physics_dt_s,
        sample_rate_hz,
        seed,
        controller,
        robot,
        sea,
        contact,
        spring_cal,
        natural_freq,
        sweep,
        output,
    };
    validate_experiment(&config)?;
    Ok((config, r.log))
}

fn validate_experiment(config: &ExperimentConfig) -> Result<(), ConfigError> {
    fn e(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
        ConfigError::invalid(key, message)
    }
    if !(config.duration_s > 0.0) {
        return Err(e("experiment.duration_s", format!("must be > 0, got {}", config.duration_s)));
    }
    if !(config.physics_dt_s > 0.0 && config.physics_dt_s <= 0.01) {
        return Err(e(
            "experiment.physics_dt_s",
            format!("must be in (0, 0.01], got {}", config.physics_dt_s),
        ));
    }
    if !(config.drop_height_m >= 0.0) {
        return Err(e(
            "experiment.drop_height_m",
            format!("must be >= 0, got {}", config.drop_height_m),
        ));
    }
    let nyquist = 1.0 / config.physics_dt_s;
    if !(config.sample_rate_hz > 0.0 && config.sample_rate_hz <= nyquist) {
        return Err(e(
            "experiment.sample_rate_hz",
            format!("must be in (0, 1/physics_dt = {nyquist}], got {}", config.sample_rate_hz),
        ));
    }
    let sample_ratio = 1.0 / (config.sample_rate_hz * config.physics_dt_s);
    if (sample_ratio - sample_ratio.round()).abs() > 1e-9 {
        return Err(e(
            "experiment.sample_rate_hz",
            format!("must divide the physics rate evenly; 1/(rate·dt) = {sample_ratio}"),
        ));
    }
    let tick_ratio = 1.0 / (config.controller.rate_hz * config.physics_dt_s);
    if (tick_ratio - tick_ratio.round()).abs() > 1e-9 || tick_ratio < 1.0 - 1e-9 {
        return Err(e(
            "control.rate_hz",
            format!("must divide the physics rate evenly; 1/(rate·dt) = {tick_ratio}"),
        ));
    }
    for j in Joint::ALL {
        let [lo, hi] = config.robot.joint_limits_deg[j];
        let pose = config.initial_pose_deg[j];
        if pose < lo || pose > hi {
            return Err(e(
                format!("experiment.initial_pose_deg.{j}"),
                format!("{pose} outside joint range [{lo}, {hi}]"),
            ));
        }
        let nf_pose = config.natural_freq.pose_deg[j];
        if nf_pose < lo || nf_pose > hi {
            return Err(e(
                format!("experiment.natural_freq.pose_deg.{j}"),
                format!("{nf_pose} outside joint range [{lo}, {hi}]"),
            ));
        }
    }
    let cal = &config.spring_cal;
    for (key, value) in [
        ("experiment.spring_cal.settle_rate_dps", cal.settle_rate_dps),
        ("experiment.spring_cal.settle_hold_s", cal.settle_hold_s),
        ("experiment.spring_cal.step_timeout_s", cal.step_timeout_s),
        ("experiment.spring_cal.wheel_inertia_kgm2", cal.wheel_inertia_kgm2),
        ("experiment.spring_cal.wheel_damping_nms_per_rad", cal.wheel_damping_nms_per_rad),
    ] {
        if !(value > 0.0) {
            return Err(e(key, format!("must be > 0, got {value}")));
        }
    }
    if cal.steps_per_quadrant == 0 {
        return Err(e("experiment.spring_cal.steps_per_quadrant", "must be >= 1".to_string()));
    }
    if let Some(t) = cal.max_torque_nm {
        if !(t > 0.0) {
            return Err(e("experiment.spring_cal.max_torque_nm", format!("must be > 0, got {t}")));
        }
    }
    let nf = &config.natural_freq;
    if !(nf.impulse_nm > 0.0) {
        return Err(e(
            "experiment.natural_freq.impulse_nm",
            format!("must be > 0, got {}", nf.impulse_nm),
        ));
    }
    if !(nf.impulse_duration_s > 0.0) {
        return Err(e(
            "experiment.natural_freq.impulse_duration_s",
            format!("must be > 0, got {}", nf.impulse_duration_s),
        ));
    }
    if let Some(j) = nf.reduced_inertia_kgm2 {
        if !(j > 0.0) {
            return Err(e(
                "experiment.natural_freq.reduced_inertia_kgm2",
                format!("must be > 0, got {j}"),
            ));
        }
    }
    Ok(())
}

/// Parse and resolve a TOML string.
pub fn load_config_str(text: &str) -> Result<LoadedConfig, ConfigError> {
    let raw: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse { message: e.to_string() })?;
    let (config, provenance) = resolve_document(&raw)?;
    Ok(LoadedConfig { raw, config, provenance })
}

/// Load, resolve, and validate a configuration file.
pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config_str(&text)
}

/// Overlay dotted-key overrides onto a raw document, creating intermediate
/// tables as needed. Values land in the same schema as hand-written files
/// and therefore pass the same validation.
pub fn apply_overrides(raw: &mut toml::Table, overrides: &Overrides) -> Result<(), ConfigError> {
    for (dotted, value) in overrides {
        let parts: Vec<&str> = dotted.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(ConfigError::invalid(dotted.clone(), "malformed dotted key".to_string()));
        }
        let mut table = &mut *raw;
        for part in &parts[..parts.len() - 1] {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| Value::Table(toml::Table::new()));
            table = entry.as_table_mut().ok_or_else(|| {
                ConfigError::invalid(dotted.clone(), format!("{part} is not a table"))
            })?;
        }
        table.insert(parts[parts.len() - 1].to_string(), value.clone());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dumping (normalized form)
// ---------------------------------------------------------------------------

fn table(entries: Vec<(&str, Value)>) -> Value {
    let mut t = toml::Table::new();
    for (k, v) in entries {
        t.insert(k.to_string(), v);
    }
    Value::Table(t)
}

/// Serialize a resolved configuration back into the raw document schema.
/// Loading the dump reproduces the configuration exactly (fixed point).
pub fn dump_document(config: &ExperimentConfig) -> toml::Table {
    use Value::{Array, Boolean, Float, Integer};
    let f = Float;

    let link = |l: &crate::robot::LinkParams, limits: [f64; 2]| {
        table(vec![
            ("mass_kg", f(l.mass_kg)),
            ("length_m", f(l.length_m)),
            ("com_offset_m", f(l.com_offset_m)),
            ("inertia_kgm2", f(l.inertia_kgm2)),
            ("limit_deg", Array(vec![f(limits[0]), f(limits[1])])),
        ])
    };
    let robot = table(vec![
        ("gravity_mps2", f(config.robot.gravity_mps2)),
        ("limit_stiffness_nm_per_deg", f(config.robot.limit_stiffness_nm_per_deg)),
        ("limit_damping_nms_per_deg", f(config.robot.limit_damping_nms_per_deg)),
        (
            "body",
            table(vec![
                ("mass_kg", f(config.robot.body_mass_kg)),
                ("com_height_m", f(config.robot.body_com_height_m)),
            ]),
        ),
        ("hip", link(&config.robot.links.hip, config.robot.joint_limits_deg.hip)),
        ("knee", link(&config.robot.links.knee, config.robot.joint_limits_deg.knee)),
        ("ankle", link(&config.robot.links.ankle, config.robot.joint_limits_deg.ankle)),
        (
            "foot",
            table(vec![
                ("heel_x_m", f(config.robot.foot.heel_x_m)),
                ("toe_x_m", f(config.robot.foot.toe_x_m)),
                ("sole_drop_m", f(config.robot.foot.sole_drop_m)),
            ]),
        ),
    ]);

    let sea_entry = |j: Joint| {
        let p = &config.sea[j];
        let mode = match config.spring_mode[j] {
            SpringMode::Active => "active",
            SpringMode::Locked => "locked",
        };
        table(vec![
            ("spring_preset", Value::String("measured".to_string())),
            ("torque_constant_nm_per_a", f(p.torque_constant_nm_per_a)),
            ("stall_torque_nm", f(p.stall_torque_nm)),
            ("no_load_speed_rpm", f(p.no_load_speed_rpm)),
            ("gear_ratio", f(p.gear_ratio)),
            ("backlash_deg", f(p.backlash_deg)),
            ("back_drive_torque_nm", f(p.back_drive_torque_nm)),
            ("spring_k_nm_per_deg", f(p.spring_k_nm_per_deg)),
            ("spring_travel_deg", f(p.spring_travel_deg)),
            ("stop_stiffness_nm_per_deg", f(p.stop_stiffness_nm_per_deg)),
            ("stop_damping_nms_per_deg", f(p.stop_damping_nms_per_deg)),
            ("hysteresis_torque_nm", f(p.hysteresis_torque_nm)),
            ("reflected_inertia_kgm2", f(p.reflected_inertia_kgm2)),
            ("motor_damping_nms_per_rad", f(p.motor_damping_nms_per_rad)),
            ("sensor_resolution_deg", f(p.sensor_resolution_deg)),
            ("ideal_sensor", Boolean(p.ideal_sensor)),
            ("spring_mode", Value::String(mode.to_string())),
        ])
    };
    let sea = table(vec![
        ("hip", sea_entry(Joint::Hip)),
        ("knee", sea_entry(Joint::Knee)),
        ("ankle", sea_entry(Joint::Ankle)),
    ]);

    let contact = table(vec![
        ("normal_stiffness_n_per_m", f(config.contact.normal_stiffness_n_per_m)),
        ("normal_damping_ns_per_m", f(config.contact.normal_damping_ns_per_m)),
        ("friction_mu", f(config.contact.friction_mu)),
        ("tangential_reg_velocity_mps", f(config.contact.tangential_reg_velocity_mps)),
    ]);

    let pd = |j: Joint| {
        table(vec![
            ("kp", f(config.controller.gains[j].kp_a_per_deg)),
            ("kd", f(config.controller.gains[j].kd_a_per_dps)),
            ("target_deg", f(config.controller.targets_deg[j])),
        ])
    };
    let feedback = match config.controller.feedback {
        FeedbackSource::MotorSensor => "motor",
        FeedbackSource::JointSensor => "joint",
    };
    let control = table(vec![
        ("rate_hz", f(config.controller.rate_hz)),
        ("current_limit_a", f(config.controller.current_limit_a)),
        ("feedback", Value::String(feedback.to_string())),
        ("d_cutoff_hz", f(config.controller.d_cutoff_hz)),
        ("hip", pd(Joint::Hip)),
        ("knee", pd(Joint::Knee)),
        ("ankle", pd(Joint::Ankle)),
    ]);

    let pose = |p: &JointMap<f64>| {
        table(vec![("hip", f(p.hip)), ("knee", f(p.knee)), ("ankle", f(p.ankle))])
    };
    let mut cal_entries = vec![
        ("joint", Value::String(config.spring_cal.joint.name().to_string())),
        ("steps_per_quadrant", Integer(config.spring_cal.steps_per_quadrant as i64)),
        ("settle_rate_dps", f(config.spring_cal.settle_rate_dps)),
        ("settle_hold_s", f(config.spring_cal.settle_hold_s)),
        ("step_timeout_s", f(config.spring_cal.step_timeout_s)),
        ("wheel_inertia_kgm2", f(config.spring_cal.wheel_inertia_kgm2)),
        ("wheel_damping_nms_per_rad", f(config.spring_cal.wheel_damping_nms_per_rad)),
    ];
    if let Some(t) = config.spring_cal.max_torque_nm {
        cal_entries.push(("max_torque_nm", f(t)));
    }
    let mut nf_entries = vec![
        ("impulse_nm", f(config.natural_freq.impulse_nm)),
        ("impulse_duration_s", f(config.natural_freq.impulse_duration_s)),
        ("pose_deg", pose(&config.natural_freq.pose_deg)),
    ];
    if let Some(j) = config.natural_freq.joint {
        nf_entries.push(("joint", Value::String(j.name().to_string())));
    }
    if let Some(i) = config.natural_freq.reduced_inertia_kgm2 {
        nf_entries.push(("reduced_inertia_kgm2", f(i)));
    }
    let mut sweep_entries = vec![(
        "protocol",
        Value::String(config.sweep.protocol.name().to_string()),
    )];
    if !config.sweep.grid.is_empty() {
        let mut grid = toml::Table::new();
        for (k, vs) in &config.sweep.grid {
            grid.insert(k.clone(), Array(vs.clone()));
        }
        sweep_entries.push(("grid", Value::Table(grid)));
    }
    if !config.sweep.cells.is_empty() {
        let cells: Vec<Value> = config
            .sweep
            .cells
            .iter()
            .map(|c| {
                let mut t = toml::Table::new();
                for (k, v) in c {
                    t.insert(k.clone(), v.clone());
                }
                Value::Table(t)
            })
            .collect();
        sweep_entries.push(("cells", Array(cells)));
    }

    let experiment = table(vec![
        ("protocol", Value::String(config.protocol.name().to_string())),
        ("drop_height_m", f(config.drop_height_m)),
        ("duration_s", f(config.duration_s)),
        ("physics_dt_s", f(config.physics_dt_s)),
        ("sample_rate_hz", f(config.sample_rate_hz)),
        ("seed", Integer(config.seed as i64)),
        ("initial_pose_deg", pose(&config.initial_pose_deg)),
        ("spring_cal", table(cal_entries)),
        ("natural_freq", table(nf_entries)),
        ("sweep", table(sweep_entries)),
    ]);

    let mut doc = toml::Table::new();
    doc.insert("robot".into(), robot);
    doc.insert("sea".into(), sea);
    doc.insert("contact".into(), contact);
    doc.insert("control".into(), control);
    doc.insert("experiment".into(), experiment);
    if let Some(dir) = &config.output.dir {
        doc.insert("output".into(), table(vec![("dir", Value::String(dir.clone()))]));
    }
    doc
}

/// Normalized TOML text of a resolved configuration.
pub fn dump_config(config: &ExperimentConfig) -> String {
    toml::to_string_pretty(&Value::Table(dump_document(config))).expect("document serializes")
}
