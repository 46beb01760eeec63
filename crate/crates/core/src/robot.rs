//! Planar rigid-body model of the single-legged robot.
//!
//! The robot is a Body on a vertical slider (fixed orientation, 1 DOF)
//! carrying a three-joint serial leg: Hip, Knee, Ankle. Generalized
//! coordinates are `q = [z, θ_hip, θ_knee, θ_ankle]` with `z` in metres
//! and joint angles in radians internally (degrees at every public
//! config/trace boundary). At the zero pose the leg hangs straight down;
//! positive joint angles swing the child link toward +x.
//!
//! Link naming follows the joint that drives each link: the Hip link is
//! the thigh, the Knee link the shank, the Ankle link the foot. The foot
//! carries heel and toe contact points offset from the ankle projection.

use std::ops::{Index, IndexMut};

use nalgebra::{Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::units::{DEG_TO_RAD, RAD_TO_DEG};

/// One of the three actuated joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Hip,
    Knee,
    Ankle,
}

impl Joint {
    pub const ALL: [Joint; 3] = [Joint::Hip, Joint::Knee, Joint::Ankle];

    pub fn index(self) -> usize {
        match self {
            Joint::Hip => 0,
            Joint::Knee => 1,
            Joint::Ankle => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Hip => "hip",
            Joint::Knee => "knee",
            Joint::Ankle => "ankle",
        }
    }

    pub fn parse(s: &str) -> Option<Joint> {
        match s {
            "hip" => Some(Joint::Hip),
            "knee" => Some(Joint::Knee),
            "ankle" => Some(Joint::Ankle),
            _ => None,
        }
    }
}

impl std::fmt::Display for Joint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed-size per-joint container, indexable by [`Joint`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointMap<T> {
    pub hip: T,
    pub knee: T,
    pub ankle: T,
}

impl<T> JointMap<T> {
    pub fn from_fn(mut f: impl FnMut(Joint) -> T) -> Self {
        Self {
            hip: f(Joint::Hip),
            knee: f(Joint::Knee),
            ankle: f(Joint::Ankle),
        }
    }

    pub fn uniform(value: T) -> Self
    where
        T: Clone,
    {
        Self {
            hip: value.clone(),
            knee: value.clone(),
            ankle: value,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> JointMap<U> {
        JointMap {
            hip: f(&self.hip),
            knee: f(&self.knee),
            ankle: f(&self.ankle),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, &T)> {
        Joint::ALL.iter().map(move |&j| (j, &self[j]))
    }
}

impl<T> Index<Joint> for JointMap<T> {
    type Output = T;
    fn index(&self, j: Joint) -> &T {
        match j {
            Joint::Hip => &self.hip,
            Joint::Knee => &self.knee,
            Joint::Ankle => &self.ankle,
        }
    }
}

impl<T> IndexMut<Joint> for JointMap<T> {
    fn index_mut(&mut self, j: Joint) -> &mut T {
        match j {
            Joint::Hip => &mut self.hip,
            Joint::Knee => &mut self.knee,
            Joint::Ankle => &mut self.ankle,
        }
    }
}

/// Inertial and geometric constants of one leg link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub mass_kg: f64,
    /// Joint-to-joint length (for the foot: ankle to sole plane) (m).
    pub length_m: f64,
    /// Distance from the proximal joint to the centre of mass (m).
    pub com_offset_m: f64,
    /// Rotational inertia about the centre of mass (kg·m²).
    pub inertia_kgm2: f64,
}

/// Heel and toe contact point offsets in the foot frame (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootGeometry {
    pub heel_x_m: f64,
    pub toe_x_m: f64,
    /// Vertical drop from the ankle axis to the sole plane (m).
    pub sole_drop_m: f64,
}

/// Full robot model: link inertials, joint limits, slider constraint and
/// foot contact geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub body_mass_kg: f64,
    /// Body centre of mass height above the hip axis (m). The body cannot
    /// rotate, so this only shifts the potential energy reference.
    pub body_com_height_m: f64,
    pub links: JointMap<LinkParams>,
    /// Joint limits [low, high] (deg).
    pub joint_limits_deg: JointMap<[f64; 2]>,
    pub foot: FootGeometry,
    pub gravity_mps2: f64,
    /// Penalty stiffness of the joint limit stops (N·m/deg).
    pub limit_stiffness_nm_per_deg: f64,
    /// Penalty damping of the joint limit stops (N·m·s/deg).
    pub limit_damping_nms_per_deg: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        let rod = |mass: f64, length: f64| LinkParams {
            mass_kg: mass,
            length_m: length,
            com_offset_m: length / 2.0,
            inertia_kgm2: mass * length * length / 12.0,
        };
        Self {
            body_mass_kg: 0.1320,
            body_com_height_m: 0.030,
            links: JointMap {
                hip: rod(0.1074, 0.075),
                knee: rod(0.1070, 0.075),
                ankle: rod(0.0676, 0.035),
            },
            joint_limits_deg: JointMap {
                hip: [-93.0, 37.0],
                knee: [-1.5, 127.0],
                ankle: [-82.0, 37.0],
            },
            foot: FootGeometry {
                heel_x_m: -0.030,
                toe_x_m: 0.030,
                sole_drop_m: 0.035,
            },
            gravity_mps2: 9.81,
            limit_stiffness_nm_per_deg: 2.0,
            limit_damping_nms_per_deg: 0.02,
        }
    }
}

impl RobotModel {
    pub fn total_mass_kg(&self) -> f64 {
        self.body_mass_kg + self.links.hip.mass_kg + self.links.knee.mass_kg + self.links.ankle.mass_kg
    }

    /// Hip height above the sole at the straight-down pose (m).
    pub fn standing_height_m(&self) -> f64 {
        self.links.hip.length_m + self.links.knee.length_m + self.foot.sole_drop_m
    }

    pub fn validate(&self) -> Result<(), (String, String)> {
        let mut checks: Vec<(String, f64)> = vec![
            ("body.mass_kg".into(), self.body_mass_kg),
            ("gravity check".into(), 1.0),
            ("limit_stiffness_nm_per_deg".into(), self.limit_stiffness_nm_per_deg),
        ];
        for j in Joint::ALL {
            let l = self.links[j];
            checks.push((format!("{j}.mass_kg"), l.mass_kg));
            checks.push((format!("{j}.length_m"), l.length_m));
            checks.push((format!("{j}.inertia_kgm2"), l.inertia_kgm2));
        }
        for (name, v) in checks {
            if !(v > 0.0) || !v.is_finite() {
                return Err((name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.gravity_mps2 >= 0.0) {
            return Err(("gravity_mps2".into(), format!("must be >= 0, got {}", self.gravity_mps2)));
        }
        if !(self.limit_damping_nms_per_deg >= 0.0) {
            return Err((
                "limit_damping_nms_per_deg".into(),
                format!("must be >= 0, got {}", self.limit_damping_nms_per_deg),
            ));
        }
        for j in Joint::ALL {
            let [lo, hi] = self.joint_limits_deg[j];
            if !(lo < hi) {
                return Err((format!("{j}.limit_deg"), format!("low {lo} must be < high {hi}")));
            }
        }
        if !(self.foot.toe_x_m > self.foot.heel_x_m) {
            return Err((
                "foot.toe_x_m".into(),
                "toe offset must exceed heel offset".into(),
            ));
        }
        Ok(())
    }
}

fn rot(phi: f64, v: Vector2<f64>) -> Vector2<f64> {
    let (s, c) = phi.sin_cos();
    Vector2::new(v.x * c - v.y * s, v.x * s + v.y * c)
}

fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// A world-frame point with its Jacobian w.r.t. `q = [z, θ1, θ2, θ3]`.
#[derive(Debug, Clone, Copy)]
pub struct PointKinematics {
    pub pos: Vector2<f64>,
    /// Columns: ∂pos/∂z, ∂pos/∂θ_hip, ∂pos/∂θ_knee, ∂pos/∂θ_ankle.
    pub jac: [Vector2<f64>; 4],
}

impl PointKinematics {
    pub fn velocity(&self, qd: &Vector4<f64>) -> Vector2<f64> {
        self.jac[0] * qd[0] + self.jac[1] * qd[1] + self.jac[2] * qd[2] + self.jac[3] * qd[3]
    }

    /// Generalized force produced by a world-frame force at this point.
    pub fn generalized_force(&self, force: Vector2<f64>) -> Vector4<f64> {
        Vector4::new(
            self.jac[0].dot(&force),
            self.jac[1].dot(&force),
            self.jac[2].dot(&force),
            self.jac[3].dot(&force),
        )
    }
}

/// Joint centres and foot contact points for one configuration.
#[derive(Debug, Clone, Copy)]
pub struct LegKinematics {
    pub hip: Vector2<f64>,
    pub knee: Vector2<f64>,
    pub ankle: Vector2<f64>,
    pub heel: PointKinematics,
    pub toe: PointKinematics,
}

/// Forward kinematics of the chain: joint centres plus heel and toe with
/// their Jacobians. `q_rad` are the three joint angles in radians.
pub fn forward_kinematics(model: &RobotModel, z_m: f64, q_rad: &[f64; 3]) -> LegKinematics {
    let phi1 = q_rad[0];
    let phi2 = q_rad[0] + q_rad[1];
    let phi3 = q_rad[0] + q_rad[1] + q_rad[2];

    let hip = Vector2::new(0.0, z_m);
    let w1 = rot(phi1, Vector2::new(0.0, -model.links.hip.length_m));
    let w2 = rot(phi2, Vector2::new(0.0, -model.links.knee.length_m));
    let knee = hip + w1;
    let ankle = knee + w2;

    let point = |local: Vector2<f64>| {
        let wp = rot(phi3, local);
        let pos = ankle + wp;
        // Partial sums of rotating vectors distal to each joint.
        let s1 = w1 + w2 + wp;
        let s2 = w2 + wp;
        let s3 = wp;
        PointKinematics {
            pos,
            jac: [Vector2::new(0.0, 1.0), perp(s1), perp(s2), perp(s3)],
        }
    };

    LegKinematics {
        hip,
        knee,
        ankle,
        heel: point(Vector2::new(model.foot.heel_x_m, -model.foot.sole_drop_m)),
        toe: point(Vector2::new(model.foot.toe_x_m, -model.foot.sole_drop_m)),
    }
}

/// Per-link centre-of-mass kinematics with first and second angle
/// derivatives, the raw material for the mass matrix and bias terms.
struct ComTerms {
    mass: f64,
    inertia: f64,
    /// World position of the centre of mass (z excluded from y).
    pos: Vector2<f64>,
    /// ∂pos/∂θ_j for j = 0..3 (joint angles only; ∂pos/∂z = (0,1)).
    jac: [Vector2<f64>; 3],
    /// Unrotated partial sums: ∂²pos/∂θ_j∂θ_l = −sum[max(j,l)].
    sum: [Vector2<f64>; 3],
    /// ∂φ_link/∂θ_j ∈ {0,1}.
    ang: [f64; 3],
}

fn com_terms(model: &RobotModel, q_rad: &[f64; 3]) -> [ComTerms; 3] {
    let phi1 = q_rad[0];
    let phi2 = q_rad[0] + q_rad[1];
    let phi3 = q_rad[0] + q_rad[1] + q_rad[2];

    let l = &model.links;
    let w1 = rot(phi1, Vector2::new(0.0, -l.hip.length_m));
    let w2 = rot(phi2, Vector2::new(0.0, -l.knee.length_m));
    let c1 = rot(phi1, Vector2::new(0.0, -l.hip.com_offset_m));
    let c2 = rot(phi2, Vector2::new(0.0, -l.knee.com_offset_m));
    let c3 = rot(phi3, Vector2::new(0.0, -l.ankle.com_offset_m));

    let zero = Vector2::zeros();
    let terms1 = {
        let sum = [c1, zero, zero];
        ComTerms {
            mass: l.hip.mass_kg,
            inertia: l.hip.inertia_kgm2,
            pos: c1,
            jac: sum.map(perp),
            sum,
            ang: [1.0, 0.0, 0.0],
        }
    };
    let terms2 = {
        let sum = [w1 + c2, c2, zero];
        ComTerms {
            mass: l.knee.mass_kg,
            inertia: l.knee.inertia_kgm2,
            pos: w1 + c2,
            jac: sum.map(perp),
            sum,
            ang: [1.0, 1.0, 0.0],
        }
    };
    let terms3 = {
        let sum = [w1 + w2 + c3, w2 + c3, c3];
        ComTerms {
            mass: l.ankle.mass_kg,
            inertia: l.ankle.inertia_kgm2,
            pos: w1 + w2 + c3,
            jac: sum.map(perp),
            sum,
            ang: [1.0, 1.0, 1.0],
        }
    };
    [terms1, terms2, terms3]
}

/// Joint-space inertia matrix for `q = [z, θ_hip, θ_knee, θ_ankle]`.
/// Symmetric positive definite; the (0,0) entry is the total mass.
pub fn mass_matrix(model: &RobotModel, q_rad: &[f64; 3]) -> Matrix4<f64> {
    let terms = com_terms(model, q_rad);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = model.total_mass_kg();
    for t in &terms {
        for j in 0..3 {
            m[(0, j + 1)] += t.mass * t.jac[j].y;
        }
        for j in 0..3 {
            for l in j..3 {
                m[(j + 1, l + 1)] +=
                    t.mass * t.jac[j].dot(&t.jac[l]) + t.inertia * t.ang[j] * t.ang[l];
            }
        }
    }
    for j in 0..4 {
        for l in (j + 1)..4 {
            m[(l, j)] = m[(j, l)];
        }
    }
    m
}

/// ∂M/∂θ_r for r = 0..3 (derivatives w.r.t. z vanish).
fn mass_matrix_derivatives(model: &RobotModel, q_rad: &[f64; 3]) -> [Matrix4<f64>; 3] {
    let terms = com_terms(model, q_rad);
    let mut dm = [Matrix4::zeros(); 3];
    for t in &terms {
        // Hessian of the com position: H[j][l] = −sum[max(j,l)].
        for r in 0..3 {
            for j in 0..3 {
                let h_jr = -t.sum[j.max(r)];
                dm[r][(0, j + 1)] += t.mass * h_jr.y;
            }
            for j in 0..3 {
                for l in j..3 {
                    let h_jr = -t.sum[j.max(r)];
                    let h_lr = -t.sum[l.max(r)];
                    dm[r][(j + 1, l + 1)] +=
                        t.mass * (h_jr.dot(&t.jac[l]) + t.jac[j].dot(&h_lr));
                }
            }
        }
    }
    for d in &mut dm {
        for j in 0..4 {
            for l in (j + 1)..4 {
                d[(l, j)] = d[(j, l)];
            }
        }
    }
    dm
}

/// Generalized velocity-product and gravity forces on the right-hand side
/// of `M q̈ = τ + bias(q, q̇) + ...`. At zero velocity this is the pure
/// gravity force; its z component is minus the total weight. The
/// velocity part uses the Christoffel factorization, so the power
/// identity `q̇ᵀ c_vel = −½ q̇ᵀ Ṁ q̇` holds exactly.
pub fn bias_forces(model: &RobotModel, q_rad: &[f64; 3], qd: &Vector4<f64>) -> Vector4<f64> {
    let terms = com_terms(model, q_rad);
    let g = model.gravity_mps2;

    let mut bias = Vector4::zeros();
    bias[0] = -g * model.total_mass_kg();
    for t in &terms {
        for j in 0..3 {
            bias[j + 1] -= g * t.mass * t.jac[j].y;
        }
    }

    let dm = mass_matrix_derivatives(model, q_rad);
    let deriv = |i: usize, j: usize, r: usize| -> f64 {
        // ∂M_ij/∂q_r with q_0 = z contributing nothing.
        if r == 0 {
            0.0
        } else {
            dm[r - 1][(i, j)]
        }
    };
    for i in 0..4 {
        let mut c = 0.0;
        for j in 0..4 {
            for k in 0..4 {
                let gamma = 0.5 * (deriv(i, j, k) + deriv(i, k, j) - deriv(j, k, i));
                c += gamma * qd[j] * qd[k];
            }
        }
        bias[i] -= c;
    }
    bias
}

/// Kinetic energy ½ q̇ᵀ M q̇ (J).
pub fn kinetic_energy(model: &RobotModel, q_rad: &[f64; 3], qd: &Vector4<f64>) -> f64 {
    let m = mass_matrix(model, q_rad);
    0.5 * qd.dot(&(m * qd))
}

/// Gravitational potential energy with the ground plane as reference (J).
pub fn potential_energy(model: &RobotModel, z_m: f64, q_rad: &[f64; 3]) -> f64 {
    let terms = com_terms(model, q_rad);
    let g = model.gravity_mps2;
    let mut v = model.body_mass_kg * g * (z_m + model.body_com_height_m);
    for t in &terms {
        v += t.mass * g * (z_m + t.pos.y);
    }
    v
}

/// Penalty torque from the joint limit stops: zero inside the range,
/// restoring spring-damper beyond it (N·m).
pub fn joint_limit_torque(
    angle_deg: f64,
    rate_dps: f64,
    limits_deg: [f64; 2],
    stiffness_nm_per_deg: f64,
    damping_nms_per_deg: f64,
) -> f64 {
    let [lo, hi] = limits_deg;
    if angle_deg > hi {
        -stiffness_nm_per_deg * (angle_deg - hi) - damping_nms_per_deg * rate_dps
    } else if angle_deg < lo {
        stiffness_nm_per_deg * (lo - angle_deg) - damping_nms_per_deg * rate_dps
    } else {
        0.0
    }
}

/// Convenience wrapper resolving the limits from the model.
pub fn joint_limit_torque_for(model: &RobotModel, joint: Joint, angle_deg: f64, rate_dps: f64) -> f64 {
    joint_limit_torque(
        angle_deg,
        rate_dps,
        model.joint_limits_deg[joint],
        model.limit_stiffness_nm_per_deg,
        model.limit_damping_nms_per_deg,
    )
}

pub fn deg_pose_to_rad(pose_deg: &JointMap<f64>) -> [f64; 3] {
    [
        pose_deg.hip * DEG_TO_RAD,
        pose_deg.knee * DEG_TO_RAD,
        pose_deg.ankle * DEG_TO_RAD,
    ]
}

pub fn rad_pose_to_deg(q_rad: &[f64; 3]) -> JointMap<f64> {
    JointMap {
        hip: q_rad[0] * RAD_TO_DEG,
        knee: q_rad[1] * RAD_TO_DEG,
        ankle: q_rad[2] * RAD_TO_DEG,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut impl Rng, model: &RobotModel) -> [f64; 3] {
        let mut q = [0.0; 3];
        for (i, j) in Joint::ALL.iter().enumerate() {
            let [lo, hi] = model.joint_limits_deg[*j];
            q[i] = rng.random_range(lo..hi) * DEG_TO_RAD;
        }
        q
    }

    #[test]
    fn straight_leg_reference_touches_ground() {
        let model = RobotModel::default();
        let z = model.standing_height_m();
        let k = forward_kinematics(&model, z, &[0.0; 3]);
        assert_relative_eq!(k.heel.pos.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(k.toe.pos.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(k.heel.pos.x, -0.030, epsilon = 1e-15);
        assert_relative_eq!(k.toe.pos.x, 0.030, epsilon = 1e-15);
    }

    #[test]
    fn knee_bend_moves_foot_sideways() {
        // Knee at +90°, others 0: shank points along +x, foot frame rotated
        // 90° so the sole offset points along +x and heel/toe offsets along y.
        let model = RobotModel::default();
        let z = 0.3;
        let k = forward_kinematics(&model, z, &[0.0, 90.0 * DEG_TO_RAD, 0.0]);
        assert_relative_eq!(k.knee.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(k.knee.y, z - 0.075, epsilon = 1e-15);
        assert_relative_eq!(k.ankle.x, 0.075, epsilon = 1e-12);
        assert_relative_eq!(k.ankle.y, z - 0.075, epsilon = 1e-12);
        assert_relative_eq!(k.heel.pos.x, 0.075 + 0.035, epsilon = 1e-12);
        assert_relative_eq!(k.heel.pos.y, z - 0.075 - 0.030, epsilon = 1e-12);
        assert_relative_eq!(k.toe.pos.x, 0.075 + 0.035, epsilon = 1e-12);
        assert_relative_eq!(k.toe.pos.y, z - 0.075 + 0.030, epsilon = 1e-12);
    }

    #[test]
    fn raising_z_translates_every_point() {
        let model = RobotModel::default();
        let q = [0.3, 0.8, -0.4];
        let a = forward_kinematics(&model, 0.2, &q);
        let b = forward_kinematics(&model, 0.45, &q);
        for (pa, pb) in [
            (a.hip, b.hip),
            (a.knee, b.knee),
            (a.ankle, b.ankle),
            (a.heel.pos, b.heel.pos),
            (a.toe.pos, b.toe.pos),
        ] {
            assert_relative_eq!(pb.x, pa.x, epsilon = 1e-15);
            assert_relative_eq!(pb.y - pa.y, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn mass_matrix_total_mass_entry() {
        let model = RobotModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let q = random_pose(&mut rng, &model);
            let m = mass_matrix(&model, &q);
            assert_relative_eq!(m[(0, 0)], 0.414, epsilon = 1e-12);
        }
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let model = RobotModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q = random_pose(&mut rng, &model);
            let m = mass_matrix(&model, &q);
            for i in 0..4 {
                for j in 0..4 {
                    assert_relative_eq!(m[(i, j)], m[(j, i)], epsilon = 1e-15);
                }
            }
            assert!(m.cholesky().is_some(), "not positive definite at {q:?}");
        }
    }

    #[test]
    fn gravity_vector_at_rest() {
        let model = RobotModel::default();
        let bias = bias_forces(&model, &[0.2, 0.5, -0.3], &Vector4::zeros());
        assert_relative_eq!(bias[0], -0.414 * 9.81, epsilon = 1e-12);
    }

    #[test]
    fn zero_gravity_zero_bias_at_rest() {
        let mut model = RobotModel::default();
        model.gravity_mps2 = 0.0;
        let bias = bias_forces(&model, &[0.2, 0.5, -0.3], &Vector4::zeros());
        for i in 0..4 {
            assert_eq!(bias[i], 0.0);
        }
    }

    #[test]
    fn velocity_terms_are_quadratic_in_rates() {
        let model = RobotModel::default();
        let q = [0.3, 0.7, -0.2];
        let qd = Vector4::new(0.1, 1.0, -2.0, 0.5);
        let g0 = bias_forces(&model, &q, &Vector4::zeros());
        let b1 = bias_forces(&model, &q, &qd) - g0;
        let b2 = bias_forces(&model, &q, &(qd * 2.0)) - g0;
        for i in 0..4 {
            assert_relative_eq!(b2[i], 4.0 * b1[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn coriolis_power_matches_mass_matrix_rate() {
        // q̇ᵀ c_vel(q, q̇) must equal −½ q̇ᵀ Ṁ q̇ with Ṁ from finite
        // differences along the motion.
        let model = RobotModel::default();
        let q = [0.4, 0.9, -0.5];
        let qd = Vector4::new(0.2, 1.3, -0.8, 2.1);
        let c_vel = bias_forces(&model, &q, &qd) - bias_forces(&model, &q, &Vector4::zeros());

        let h = 1e-6;
        let q_plus = [q[0] + h * qd[1], q[1] + h * qd[2], q[2] + h * qd[3]];
        let q_minus = [q[0] - h * qd[1], q[1] - h * qd[2], q[2] - h * qd[3]];
        let m_dot = (mass_matrix(&model, &q_plus) - mass_matrix(&model, &q_minus)) / (2.0 * h);

        let lhs = qd.dot(&c_vel);
        let rhs = -0.5 * qd.dot(&(m_dot * qd));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-7, max_relative = 1e-6);
    }

    #[test]
    fn contact_point_jacobians_match_finite_differences() {
        let model = RobotModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = 1e-7;
        for _ in 0..50 {
            let q = random_pose(&mut rng, &model);
            let z = rng.random_range(0.1..0.4);
            let k = forward_kinematics(&model, z, &q);
            for (idx, pt) in [(0, k.heel), (1, k.toe)] {
                let _ = idx;
                // z column.
                let kp = forward_kinematics(&model, z + h, &q);
                let km = forward_kinematics(&model, z - h, &q);
                let (pp, pm) = if idx == 0 {
                    (kp.heel.pos, km.heel.pos)
                } else {
                    (kp.toe.pos, km.toe.pos)
                };
                let fd = (pp - pm) / (2.0 * h);
                assert_relative_eq!(fd.x, pt.jac[0].x, epsilon = 1e-6);
                assert_relative_eq!(fd.y, pt.jac[0].y, epsilon = 1e-6);
                // joint columns.
                for c in 0..3 {
                    let mut qp = q;
                    let mut qm = q;
                    qp[c] += h;
                    qm[c] -= h;
                    let kp = forward_kinematics(&model, z, &qp);
                    let km = forward_kinematics(&model, z, &qm);
                    let (pp, pm) = if idx == 0 {
                        (kp.heel.pos, km.heel.pos)
                    } else {
                        (kp.toe.pos, km.toe.pos)
                    };
                    let fd = (pp - pm) / (2.0 * h);
                    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
                    assert!(rel(fd.x, pt.jac[c + 1].x) < 1e-5);
                    assert!(rel(fd.y, pt.jac[c + 1].y) < 1e-5);
                }
            }
        }
    }

    #[test]
    fn mass_matrix_derivatives_match_finite_differences() {
        let model = RobotModel::default();
        let q = [0.35, 0.8, -0.6];
        let dm = mass_matrix_derivatives(&model, &q);
        let h = 1e-6;
        for r in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[r] += h;
            qm[r] -= h;
            let fd = (mass_matrix(&model, &qp) - mass_matrix(&model, &qm)) / (2.0 * h);
            for i in 0..4 {
                for j in 0..4 {
                    assert_relative_eq!(dm[r][(i, j)], fd[(i, j)], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn limit_torque_zero_inside_range() {
        let model = RobotModel::default();
        assert_eq!(joint_limit_torque_for(&model, Joint::Knee, 60.0, 0.0), 0.0);
    }

    #[test]
    fn limit_torque_restores_beyond_upper() {
        let model = RobotModel::default();
        let tau = joint_limit_torque_for(&model, Joint::Knee, 130.0, 0.0);
        assert!(tau < 0.0);
        assert_relative_eq!(tau, -2.0 * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn limit_torque_zero_exactly_at_limit() {
        let model = RobotModel::default();
        assert_eq!(joint_limit_torque_for(&model, Joint::Knee, 127.0, 0.0), 0.0);
        assert_eq!(joint_limit_torque_for(&model, Joint::Knee, -1.5, 0.0), 0.0);
    }

    #[test]
    fn limit_torque_restores_below_lower() {
        let model = RobotModel::default();
        let tau = joint_limit_torque_for(&model, Joint::Ankle, -85.0, 0.0);
        assert!(tau > 0.0);
    }
}
