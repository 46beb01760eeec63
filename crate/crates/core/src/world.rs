//! World integration: the leg on its slider, three actuator units, ground
//! contact and joint limits, advanced by fixed-step semi-implicit Euler.
//!
//! One integration loop owns one [`World`]. All state is plain data and
//! can be moved between threads; parallel experiment runs share nothing
//! mutable.

use nalgebra::{Vector2, Vector4};

use crate::contact::{contact_force, ContactParams};
use crate::robot::{
    bias_forces, forward_kinematics, joint_limit_torque_for, kinetic_energy, mass_matrix,
    potential_energy, Joint, JointMap, RobotModel,
};
use crate::sea::{
    advance_motor_side, motor_available_torque, gear_friction_torque, spring_torque, SeaParams,
    SeaState, SpringMode,
};
use crate::units::{dps_to_rpm, stiffness_per_rad, DEG_TO_RAD, RAD_TO_DEG};

/// Simulation fault: the integrator produced a non-finite quantity.
#[derive(Debug, Clone, thiserror::Error)]
pub enum SimFault {
    #[error("non-finite {quantity} at t = {time_s:.6} s")]
    NonFinite { quantity: String, time_s: f64 },
    #[error("mass matrix lost positive definiteness at t = {time_s:.6} s")]
    MassMatrix { time_s: f64 },
}

/// State of one foot contact point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactPointState {
    pub in_contact: bool,
    pub penetration_m: f64,
}

/// Full simulation state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Body (hip axis) height above ground (m).
    pub z_m: f64,
    pub zd_mps: f64,
    pub sea: JointMap<SeaState>,
    /// Heel and toe contact states.
    pub contacts: [ContactPointState; 2],
    pub sim_time_s: f64,
    step_count: u64,
}

impl WorldState {
    pub fn joint_angles_rad(&self) -> [f64; 3] {
        [
            self.sea.hip.joint_angle_deg * DEG_TO_RAD,
            self.sea.knee.joint_angle_deg * DEG_TO_RAD,
            self.sea.ankle.joint_angle_deg * DEG_TO_RAD,
        ]
    }

    pub fn generalized_velocity(&self) -> Vector4<f64> {
        Vector4::new(
            self.zd_mps,
            self.sea.hip.joint_velocity_dps * DEG_TO_RAD,
            self.sea.knee.joint_velocity_dps * DEG_TO_RAD,
            self.sea.ankle.joint_velocity_dps * DEG_TO_RAD,
        )
    }
}

/// Fixture constraints for bench experiments: freezing the body slider,
/// individual joints, or clamping motor shafts with the lock gear.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fixture {
    /// Body secured to a stand: the slider coordinate is frozen.
    pub body_fixed: bool,
    /// Joint frozen solid (rigid spring plus clamped motor).
    pub frozen: JointMap<bool>,
    /// Lock gear installed: the motor-side shaft cannot rotate, the
    /// spring still acts.
    pub motor_locked: JointMap<bool>,
}

/// Per-step force outputs kept for trace recording.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepForces {
    /// (normal, tangential) force on the heel (N).
    pub heel_n: (f64, f64),
    pub toe_n: (f64, f64),
    /// Torque transmitted by each spring (N·m); zero for locked joints.
    pub spring_nm: JointMap<f64>,
}

pub struct World {
    pub robot: RobotModel,
    pub contact: ContactParams,
    pub sea: JointMap<SeaParams>,
    pub fixture: Fixture,
    pub state: WorldState,
    /// Forces computed during the most recent step.
    pub last_forces: StepForces,
}

impl World {
    /// World at rest in the given pose with zero spring deflections.
    pub fn new(
        robot: RobotModel,
        contact: ContactParams,
        sea: JointMap<SeaParams>,
        pose_deg: &JointMap<f64>,
        spring_mode: &JointMap<SpringMode>,
        z_m: f64,
    ) -> Self {
        let state = WorldState {
            z_m,
            zd_mps: 0.0,
            sea: JointMap::from_fn(|j| SeaState::at_rest(pose_deg[j], spring_mode[j])),
            contacts: [ContactPointState::default(); 2],
            sim_time_s: 0.0,
            step_count: 0,
        };
        let mut world = Self {
            robot,
            contact,
            sea,
            fixture: Fixture::default(),
            state,
            last_forces: StepForces::default(),
        };
        let (forces, contacts, _) = world.contact_pass();
        world.last_forces = forces;
        world.state.contacts = contacts;
        world
    }

    /// Contact evaluation for the current state: recorded forces, contact
    /// point states, and the generalized force contribution.
    fn contact_pass(&self) -> (StepForces, [ContactPointState; 2], Vector4<f64>) {
        let state = &self.state;
        let q = state.joint_angles_rad();
        let qd = state.generalized_velocity();
        let kin = forward_kinematics(&self.robot, state.z_m, &q);
        let mut forces = StepForces::default();
        let mut contacts = [ContactPointState::default(); 2];
        let mut generalized = Vector4::zeros();
        for (idx, pt) in [(0usize, &kin.heel), (1usize, &kin.toe)] {
            let vel = pt.velocity(&qd);
            let (f_normal, f_tangential) = contact_force(pt.pos.y, vel.y, vel.x, &self.contact);
            generalized += pt.generalized_force(Vector2::new(f_tangential, f_normal));
            contacts[idx] = ContactPointState {
                in_contact: f_normal > 0.0,
                penetration_m: (-pt.pos.y).max(0.0),
            };
            if idx == 0 {
                forces.heel_n = (f_normal, f_tangential);
            } else {
                forces.toe_n = (f_normal, f_tangential);
            }
        }
        (forces, contacts, generalized)
    }

    /// Forces acting in the current state, for trace recording: contact
    /// forces plus the torque each active spring currently transmits. The
    /// friction memory is not advanced.
    pub fn snapshot_forces(&self) -> StepForces {
        let (mut forces, _, _) = self.contact_pass();
        for j in Joint::ALL {
            let s = &self.state.sea[j];
            if s.spring_mode == SpringMode::Active {
                let (torque, _) = spring_torque(
                    s.deflection_deg(),
                    s.deflection_rate_dps(),
                    0.0,
                    &self.sea[j],
                    s.hysteresis_nm,
                );
                forces.spring_nm[j] = torque;
            }
        }
        forces
    }

    /// Height of the lowest foot point above ground at a given pose with
    /// the hip at z = 0.
    pub fn lowest_foot_point_m(robot: &RobotModel, pose_deg: &JointMap<f64>) -> f64 {
        let q = crate::robot::deg_pose_to_rad(pose_deg);
        let k = forward_kinematics(robot, 0.0, &q);
        k.heel.pos.y.min(k.toe.pos.y)
    }

    /// Advance one substep of `dt_s`, driving each unit with the held
    /// current command plus any external joint torque (N·m).
    ///
    /// Semi-implicit Euler on `M q̈ = bias + contact + limits + actuation`,
    /// interleaved with the motor-side substep of every active unit.
    pub fn step(
        &mut self,
        current_a: &JointMap<f64>,
        external_nm: &JointMap<f64>,
        dt_s: f64,
    ) -> Result<(), SimFault> {
        debug_assert!(dt_s > 0.0);
        let state = &self.state;
        let q = state.joint_angles_rad();
        let qd = state.generalized_velocity();
        let z = state.z_m;

        let mut m = mass_matrix(&self.robot, &q);
        let mut rhs = bias_forces(&self.robot, &q, &qd);

        // Ground contact at heel and toe.
        let (mut forces, contacts, contact_rhs) = self.contact_pass();
        rhs += contact_rhs;

        // Joint limit stops and external torques.
        for j in Joint::ALL {
            let s = &state.sea[j];
            rhs[1 + j.index()] +=
                joint_limit_torque_for(&self.robot, j, s.joint_angle_deg, s.joint_velocity_dps)
                    + external_nm[j];
        }

        // Actuation. Active joints are driven through the spring; locked
        // joints couple the motor rigidly, adding its reflected inertia
        // and gear friction to the joint coordinate.
        let mut spring_updates: JointMap<Option<(f64, f64)>> = JointMap::default();
        for j in Joint::ALL {
            let s = &state.sea[j];
            let p = &self.sea[j];
            let row = 1 + j.index();
            match s.spring_mode {
                SpringMode::Active => {
                    let (torque, hysteresis) = spring_torque(
                        s.deflection_deg(),
                        s.deflection_rate_dps(),
                        dt_s,
                        p,
                        s.hysteresis_nm,
                    );
                    rhs[row] += torque;
                    forces.spring_nm[j] = torque;
                    spring_updates[j] = Some((torque, hysteresis));
                }
                SpringMode::Locked => {
                    m[(row, row)] += p.reflected_inertia_kgm2;
                    let motor_nm = motor_available_torque(
                        current_a[j],
                        dps_to_rpm(s.joint_velocity_dps),
                        p,
                    );
                    rhs[row] += motor_nm;
                    rhs[row] += gear_friction_torque(s.joint_velocity_dps, rhs[row], p);
                }
            }
        }

        // Frozen coordinates: unit diagonal row/column and zero force so
        // the solve leaves them untouched.
        let mut freeze = [self.fixture.body_fixed, false, false, false];
        for j in Joint::ALL {
            freeze[1 + j.index()] = self.fixture.frozen[j];
        }
        for (idx, frozen) in freeze.iter().enumerate() {
            if *frozen {
                for k in 0..4 {
                    m[(idx, k)] = 0.0;
                    m[(k, idx)] = 0.0;
                }
                m[(idx, idx)] = 1.0;
                rhs[idx] = 0.0;
            }
        }

        let time_after = (state.step_count + 1) as f64 * dt_s;
        let qdd = match m.cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => return Err(SimFault::MassMatrix { time_s: time_after }),
        };

        // Semi-implicit Euler: velocities first, then positions.
        let qd_new = qd + qdd * dt_s;
        let z_new = z + qd_new[0] * dt_s;
        let mut q_new = q;
        for i in 0..3 {
            q_new[i] += qd_new[1 + i] * dt_s;
        }

        // Write back joint-side state and advance the actuator units.
        let mut next = state.clone();
        next.z_m = z_new;
        next.zd_mps = qd_new[0];
        next.contacts = contacts;
        next.step_count = state.step_count + 1;
        next.sim_time_s = time_after;
        for j in Joint::ALL {
            let row = 1 + j.index();
            let s = &mut next.sea[j];
            s.joint_angle_deg = q_new[row - 1] * RAD_TO_DEG;
            s.joint_velocity_dps = qd_new[row] * RAD_TO_DEG;
            match s.spring_mode {
                SpringMode::Active => {
                    let (torque, hysteresis) =
                        spring_updates[j].expect("active joint has a spring update");
                    if self.fixture.motor_locked[j] {
                        s.motor_velocity_dps = 0.0;
                        s.hysteresis_nm = hysteresis;
                    } else {
                        let advanced = advance_motor_side(
                            &state.sea[j],
                            current_a[j],
                            torque,
                            hysteresis,
                            dt_s,
                            &self.sea[j],
                        );
                        s.motor_angle_deg = advanced.motor_angle_deg;
                        s.motor_velocity_dps = advanced.motor_velocity_dps;
                        s.backlash_offset_deg = advanced.backlash_offset_deg;
                        s.hysteresis_nm = advanced.hysteresis_nm;
                    }
                }
                SpringMode::Locked => {
                    s.motor_angle_deg = s.joint_angle_deg;
                    s.motor_velocity_dps = s.joint_velocity_dps;
                    s.backlash_offset_deg = 0.0;
                    s.hysteresis_nm = 0.0;
                }
            }
        }

        if let Some(name) = non_finite_quantity(&next) {
            return Err(SimFault::NonFinite {
                quantity: name,
                time_s: time_after,
            });
        }

        self.state = next;
        self.last_forces = forces;
        Ok(())
    }

    /// Total mechanical energy: kinetic (including locked and active motor
    /// rotors), gravitational, spring and stop elastic, and contact
    /// penalty potential (J).
    pub fn total_energy(&self) -> f64 {
        let state = &self.state;
        let q = state.joint_angles_rad();
        let qd = state.generalized_velocity();
        let mut energy = kinetic_energy(&self.robot, &q, &qd)
            + potential_energy(&self.robot, state.z_m, &q);

        for j in Joint::ALL {
            let s = &state.sea[j];
            let p = &self.sea[j];
            match s.spring_mode {
                SpringMode::Active => {
                    let rotor_rate = s.motor_velocity_dps * DEG_TO_RAD;
                    energy += 0.5 * p.reflected_inertia_kgm2 * rotor_rate * rotor_rate;
                    let defl_rad = s.deflection_deg() * DEG_TO_RAD;
                    energy += 0.5 * stiffness_per_rad(p.spring_k_nm_per_deg) * defl_rad * defl_rad;
                    let excess_deg = (s.deflection_deg().abs() - p.spring_travel_deg).max(0.0);
                    let excess_rad = excess_deg * DEG_TO_RAD;
                    energy += 0.5
                        * stiffness_per_rad(p.stop_stiffness_nm_per_deg)
                        * excess_rad
                        * excess_rad;
                }
                SpringMode::Locked => {
                    let rate = s.joint_velocity_dps * DEG_TO_RAD;
                    energy += 0.5 * p.reflected_inertia_kgm2 * rate * rate;
                }
            }
        }

        let kin = forward_kinematics(&self.robot, state.z_m, &q);
        for pos in [kin.heel.pos, kin.toe.pos] {
            if pos.y < 0.0 {
                energy += 0.5 * self.contact.normal_stiffness_n_per_m * pos.y * pos.y;
            }
        }
        energy
    }
}

fn non_finite_quantity(state: &WorldState) -> Option<String> {
    if !state.z_m.is_finite() {
        return Some("body height".into());
    }
    if !state.zd_mps.is_finite() {
        return Some("body velocity".into());
    }
    for j in Joint::ALL {
        if let Some(field) = state.sea[j].non_finite_field() {
            return Some(format!("{j} {field}"));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frictionless_sea() -> SeaParams {
        let mut p = SeaParams::measured();
        p.back_drive_torque_nm = 0.0;
        p.hysteresis_torque_nm = 0.0;
        p.motor_damping_nms_per_rad = 0.0;
        p.backlash_deg = 0.0;
        p.ideal_sensor = true;
        p
    }

    fn airborne_world(modes: JointMap<SpringMode>) -> World {
        let robot = RobotModel::default();
        let pose = JointMap { hip: 0.0, knee: 0.0, ankle: 0.0 };
        World::new(
            robot,
            ContactParams::default(),
            JointMap::uniform(frictionless_sea()),
            &pose,
            &modes,
            6.0,
        )
    }

    #[test]
    fn ballistic_fall_matches_gravity() {
        let mut w = airborne_world(JointMap::uniform(SpringMode::Locked));
        let dt = 1e-4;
        let zero = JointMap::uniform(0.0);
        for _ in 0..10_000 {
            w.step(&zero, &zero, dt).unwrap();
        }
        // After 1 s of free fall the vertical speed is −g·t.
        assert_relative_eq!(w.state.zd_mps, -9.81, epsilon = 1e-9);
        assert_relative_eq!(w.state.sim_time_s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn drop_touchdown_speed_matches_free_fall() {
        let robot = RobotModel::default();
        let pose = JointMap { hip: 0.0, knee: 0.0, ankle: 0.0 };
        let drop = 0.070;
        let z0 = drop - World::lowest_foot_point_m(&robot, &pose);
        let mut w = World::new(
            robot,
            ContactParams::default(),
            JointMap::uniform(frictionless_sea()),
            &pose,
            &JointMap::uniform(SpringMode::Locked),
            z0,
        );
        let dt = 1e-4;
        let zero = JointMap::uniform(0.0);
        let mut touchdown_speed = None;
        for _ in 0..20_000 {
            let pre_step_speed = w.state.zd_mps;
            w.step(&zero, &zero, dt).unwrap();
            // The contact flag reflects the state at the start of the
            // step, so the touchdown speed is the pre-step speed.
            if w.state.contacts.iter().any(|c| c.in_contact) {
                touchdown_speed = Some(pre_step_speed);
                break;
            }
        }
        let v = touchdown_speed.expect("no touchdown").abs();
        let expected = (2.0 * 9.81 * drop).sqrt();
        assert!((v - expected).abs() < 0.01, "touchdown {v} vs {expected}");
    }

    #[test]
    fn ballistic_energy_drift_below_tolerance() {
        // Airborne, zero currents, zero friction: total energy drifts less
        // than 0.1% over one simulated second at dt = 1e-4.
        let mut w = airborne_world(JointMap::uniform(SpringMode::Active));
        // Give the joints motion so the Coriolis terms are exercised.
        w.state.sea.hip.joint_velocity_dps = 40.0;
        w.state.sea.knee.joint_velocity_dps = -60.0;
        w.state.sea.ankle.joint_velocity_dps = 90.0;
        let e0 = w.total_energy();
        let dt = 1e-4;
        let zero = JointMap::uniform(0.0);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            w.step(&zero, &zero, dt).unwrap();
            worst = worst.max((w.total_energy() - e0).abs());
        }
        assert!(
            worst / e0.abs() < 1e-3,
            "energy drift {} of {}",
            worst / e0.abs(),
            e0
        );
    }

    #[test]
    fn locked_mode_deflection_identically_zero() {
        let robot = RobotModel::default();
        let pose = JointMap { hip: -20.0, knee: 45.0, ankle: -15.0 };
        let z0 = 0.070 - World::lowest_foot_point_m(&robot, &pose);
        let mut w = World::new(
            robot,
            ContactParams::default(),
            JointMap::uniform(SeaParams::measured()),
            &pose,
            &JointMap::uniform(SpringMode::Locked),
            z0,
        );
        let dt = 1e-4;
        let currents = JointMap::uniform(0.1);
        let zero = JointMap::uniform(0.0);
        for _ in 0..5_000 {
            w.step(&currents, &zero, dt).unwrap();
            for j in Joint::ALL {
                assert_eq!(w.state.sea[j].deflection_deg(), 0.0);
            }
        }
    }

    #[test]
    fn frozen_joints_do_not_move() {
        let mut w = airborne_world(JointMap::uniform(SpringMode::Active));
        w.fixture.body_fixed = true;
        w.fixture.frozen = JointMap { hip: true, knee: true, ankle: false };
        w.fixture.motor_locked = JointMap::uniform(true);
        let dt = 1e-4;
        let zero = JointMap::uniform(0.0);
        let kick = JointMap { hip: 0.0, knee: 0.0, ankle: 0.05 };
        let mut peak: f64 = 0.0;
        for _ in 0..2_000 {
            w.step(&zero, &kick, dt).unwrap();
            peak = peak.max(w.state.sea.ankle.joint_angle_deg.abs());
        }
        assert_eq!(w.state.z_m, 6.0);
        assert_eq!(w.state.sea.hip.joint_angle_deg, 0.0);
        assert_eq!(w.state.sea.knee.joint_angle_deg, 0.0);
        assert!(peak > 1.0, "ankle never moved, peak {peak}");
        // Clamped motor never rotates.
        assert_eq!(w.state.sea.ankle.motor_angle_deg, 0.0);
    }

    #[test]
    fn contact_cone_respected_during_landing() {
        let robot = RobotModel::default();
        let pose = JointMap { hip: -20.0, knee: 45.0, ankle: -15.0 };
        let z0 = 0.070 - World::lowest_foot_point_m(&robot, &pose);
        let mu = ContactParams::default().friction_mu;
        let mut w = World::new(
            robot,
            ContactParams::default(),
            JointMap::uniform(SeaParams::measured()),
            &pose,
            &JointMap { hip: SpringMode::Locked, knee: SpringMode::Active, ankle: SpringMode::Active },
            z0,
        );
        let dt = 1e-4;
        let zero = JointMap::uniform(0.0);
        for _ in 0..10_000 {
            w.step(&zero, &zero, dt).unwrap();
            for (f_normal, f_tangential) in [w.last_forces.heel_n, w.last_forces.toe_n] {
                assert!(f_normal >= 0.0);
                assert!(f_tangential.abs() <= mu * f_normal + 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_state_is_reported() {
        let mut w = airborne_world(JointMap::uniform(SpringMode::Active));
        w.state.zd_mps = f64::NAN;
        let zero = JointMap::uniform(0.0);
        let err = w.step(&zero, &zero, 1e-4).unwrap_err();
        match err {
            SimFault::NonFinite { quantity, .. } => {
                assert!(quantity.contains("velocity") || quantity.contains("height"));
            }
            other => panic!("unexpected fault {other:?}"),
        }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let robot = RobotModel::default();
            let pose = JointMap { hip: -20.0, knee: 45.0, ankle: -15.0 };
            let z0 = 0.070 - World::lowest_foot_point_m(&robot, &pose);
            let mut w = World::new(
                robot,
                ContactParams::default(),
                JointMap::uniform(SeaParams::measured()),
                &pose,
                &JointMap { hip: SpringMode::Locked, knee: SpringMode::Active, ankle: SpringMode::Active },
                z0,
            );
            let dt = 1e-4;
            let currents = JointMap { hip: 0.02, knee: -0.05, ankle: 0.01 };
            let zero = JointMap::uniform(0.0);
            for _ in 0..5_000 {
                w.step(&currents, &zero, dt).unwrap();
            }
            w.state
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.z_m.to_bits(), b.z_m.to_bits());
    }
}
