//! Free-vibration natural frequency measurement.
//!
//! The selected joint keeps its spring active while every motor is
//! clamped with a lock gear and the remaining joints are frozen rigid;
//! the body is secured to a stand. A standardized torque impulse replaces
//! the manual flick, the joint angle is recorded, and the dominant
//! frequency is read from the spectrum.
//!
//! A reduced mode replaces the whole robot by a configured point inertia
//! on the spring, for which `f = √(k/J)/2π` is the analytic reference.

use crate::analysis::{dominant_frequency, Trace};
use crate::robot::{Joint, JointMap};
use crate::sea::spring_torque;
use crate::units::DEG_TO_RAD;
use crate::world::World;

use super::{ExperimentConfig, ExperimentError};

/// Minimum peak excursion for the impulse to count as having beaten
/// stiction (deg).
const MIN_EXCURSION_DEG: f64 = 0.5;

fn record_sample(trace: &mut Trace, t: f64, joint: Joint, angle_deg: f64, rate_dps: f64, motor_deg: f64, spring_nm: f64) {
    trace.t_s.push(t);
    trace.z_m.push(0.0);
    trace.zd_mps.push(0.0);
    for j in Joint::ALL {
        let ch = &mut trace.joints[j];
        if j == joint {
            ch.q_deg.push(angle_deg);
            ch.qd_dps.push(rate_dps);
            ch.motor_deg.push(motor_deg);
            ch.spring_nm.push(spring_nm);
        } else {
            ch.q_deg.push(0.0);
            ch.qd_dps.push(0.0);
            ch.motor_deg.push(0.0);
            ch.spring_nm.push(0.0);
        }
        ch.i_ma.push(0.0);
    }
    trace.fn_heel_n.push(0.0);
    trace.fn_toe_n.push(0.0);
    trace.ft_heel_n.push(0.0);
    trace.ft_toe_n.push(0.0);
}

/// Run the protocol for one joint and return the recorded trace and the
/// dominant frequency (Hz).
pub fn run_natural_frequency(
    config: &ExperimentConfig,
    joint: Joint,
) -> Result<(Trace, f64), ExperimentError> {
    let settings = &config.natural_freq;
    let dt = config.physics_dt_s;
    let total = config.total_substeps();
    let every = config.substeps_per_sample();
    let impulse_steps = (settings.impulse_duration_s / dt).round() as u64;

    let mut trace = Trace::default();
    let signal: Vec<f64>;

    if let Some(inertia) = settings.reduced_inertia_kgm2 {
        // Reduced single-joint bench: J·θ̈ = τ_impulse + τ_spring with the
        // motor side clamped at zero.
        let params = &config.sea[joint];
        let mut angle_deg = 0.0f64;
        let mut rate_dps = 0.0f64;
        let mut hysteresis = 0.0f64;
        for step in 0..total {
            if step % every == 0 {
                let defl = -angle_deg;
                trace_sample_reduced(&mut trace, step as f64 * dt, joint, angle_deg, rate_dps, params, defl);
            }
            let impulse = if step < impulse_steps { settings.impulse_nm } else { 0.0 };
            let (transmitted, new_h) = spring_torque(-angle_deg, -rate_dps, dt, params, hysteresis);
            hysteresis = new_h;
            let accel_radps2 = (impulse + transmitted) / inertia;
            rate_dps += accel_radps2 / DEG_TO_RAD * dt;
            angle_deg += rate_dps * dt;
        }
        signal = trace.joints[joint].q_deg.clone();
    } else {
        // Full robot on the stand: body fixed, other joints frozen, all
        // motors clamped.
        let mut world = World::new(
            config.robot.clone(),
            config.contact,
            config.sea,
            &settings.pose_deg,
            &JointMap::uniform(crate::sea::SpringMode::Active),
            1.0, // high enough that the foot never touches the ground
        );
        world.fixture.body_fixed = true;
        world.fixture.motor_locked = JointMap::uniform(true);
        world.fixture.frozen = JointMap::from_fn(|j| j != joint);

        let zero = JointMap::uniform(0.0);
        for step in 0..total {
            if step % every == 0 {
                let s = &world.state.sea[joint];
                record_sample(
                    &mut trace,
                    world.state.sim_time_s,
                    joint,
                    s.joint_angle_deg,
                    s.joint_velocity_dps,
                    s.motor_angle_deg,
                    world.snapshot_forces().spring_nm[joint],
                );
            }
            let mut external = JointMap::uniform(0.0);
            if step < impulse_steps {
                external[joint] = settings.impulse_nm;
            }
            world.step(&zero, &external, dt)?;
        }
        signal = trace.joints[joint].q_deg.clone();
    }

    let rest = signal.first().copied().unwrap_or(0.0);
    let peak = signal.iter().fold(0.0f64, |a, &x| a.max((x - rest).abs()));
    if peak < MIN_EXCURSION_DEG {
        return Err(ExperimentError::InsufficientExcitation {
            peak_deg: peak,
            required_deg: MIN_EXCURSION_DEG,
        });
    }

    let frequency = dominant_frequency(&signal, config.sample_rate_hz)?
        .ok_or(ExperimentError::NoDominantFrequency)?;
    Ok((trace, frequency))
}

fn trace_sample_reduced(
    trace: &mut Trace,
    t: f64,
    joint: Joint,
    angle_deg: f64,
    rate_dps: f64,
    params: &crate::sea::SeaParams,
    deflection_deg: f64,
) {
    let spring = params.spring_k_nm_per_deg * deflection_deg;
    record_sample(trace, t, joint, angle_deg, rate_dps, 0.0, spring);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Protocol;
    use std::f64::consts::PI;

    fn reduced_config(inertia: f64, spring_k: f64) -> ExperimentConfig {
        let mut config = ExperimentConfig::defaults(Protocol::NaturalFreq);
        config.natural_freq.reduced_inertia_kgm2 = Some(inertia);
        for j in Joint::ALL {
            config.sea[j].spring_k_nm_per_deg = spring_k;
            config.sea[j].hysteresis_torque_nm = 0.0;
        }
        config
    }

    #[test]
    fn reduced_model_matches_analytic_frequency() {
        let config = reduced_config(2.0e-4, 0.012);
        let (_, f) = run_natural_frequency(&config, Joint::Knee).unwrap();
        let k_rad = 0.012 * 180.0 / PI;
        let expected = (k_rad / 2.0e-4).sqrt() / (2.0 * PI);
        assert!((expected - 9.33).abs() < 0.01, "analytic sanity {expected}");
        assert!(
            (f - expected).abs() / expected < 0.02,
            "measured {f}, analytic {expected}"
        );
    }

    #[test]
    fn quadrupling_inertia_halves_frequency() {
        let (_, f1) = run_natural_frequency(&reduced_config(2.0e-4, 0.012), Joint::Knee).unwrap();
        let (_, f4) = run_natural_frequency(&reduced_config(8.0e-4, 0.012), Joint::Knee).unwrap();
        assert!((f1 / f4 - 2.0).abs() < 0.05, "ratio {}", f1 / f4);
    }

    #[test]
    fn feeble_impulse_is_rejected() {
        let mut config = reduced_config(2.0e-4, 0.012);
        config.natural_freq.impulse_nm = 1e-6;
        match run_natural_frequency(&config, Joint::Knee) {
            Err(ExperimentError::InsufficientExcitation { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_robot_frequencies_ordered_by_distal_inertia() {
        let mut config = ExperimentConfig::defaults(Protocol::NaturalFreq);
        // Stronger flicks for the heavier proximal joints so every joint
        // rings for several cycles against the spring friction.
        let impulse = |j: Joint| match j {
            Joint::Hip => (0.5, 0.020),
            Joint::Knee => (0.3, 0.010),
            Joint::Ankle => (0.15, 0.010),
        };
        let mut freqs = JointMap::uniform(0.0);
        for j in Joint::ALL {
            let (nm, dur) = impulse(j);
            config.natural_freq.impulse_nm = nm;
            config.natural_freq.impulse_duration_s = dur;
            let (_, f) = run_natural_frequency(&config, j).unwrap();
            freqs[j] = f;
        }
        assert!(
            freqs.hip < freqs.knee && freqs.knee < freqs.ankle,
            "expected ascending frequencies, got {freqs:?}"
        );
    }
}
