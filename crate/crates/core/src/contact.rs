//! Compliant point contact with the ground plane at y = 0.
//!
//! Penalty spring-damper normal force with a tanh-regularized Coulomb
//! friction tangential force. The friction cone |F_t| ≤ μ·F_n holds by
//! construction.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub normal_stiffness_n_per_m: f64,
    pub normal_damping_ns_per_m: f64,
    pub friction_mu: f64,
    /// Tangential velocity scale of the friction regularization (m/s).
    pub tangential_reg_velocity_mps: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            normal_stiffness_n_per_m: 5000.0,
            normal_damping_ns_per_m: 50.0,
            friction_mu: 0.8,
            tangential_reg_velocity_mps: 1e-3,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive: [(&'static str, f64); 3] = [
            ("normal_stiffness_n_per_m", self.normal_stiffness_n_per_m),
            ("normal_damping_ns_per_m", self.normal_damping_ns_per_m),
            ("tangential_reg_velocity_mps", self.tangential_reg_velocity_mps),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err((name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.friction_mu >= 0.0) || !self.friction_mu.is_finite() {
            return Err(("friction_mu", format!("must be >= 0, got {}", self.friction_mu)));
        }
        Ok(())
    }
}

/// Normal and tangential force on a contact point.
///
/// `height_m` is the point height above ground (negative inside), and the
/// velocities are the world-frame vertical and horizontal components.
/// Returns `(F_n, F_t)`: no force above ground, otherwise
/// `F_n = max(0, −k·h − d·ḣ)` and `F_t = −μ·F_n·tanh(v_t/v_reg)`.
pub fn contact_force(
    height_m: f64,
    vertical_velocity_mps: f64,
    tangential_velocity_mps: f64,
    params: &ContactParams,
) -> (f64, f64) {
    if height_m >= 0.0 {
        return (0.0, 0.0);
    }
    let normal = (-params.normal_stiffness_n_per_m * height_m
        - params.normal_damping_ns_per_m * vertical_velocity_mps)
        .max(0.0);
    let tangential = -params.friction_mu
        * normal
        * (tangential_velocity_mps / params.tangential_reg_velocity_mps).tanh();
    (normal, tangential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_force_above_ground() {
        let p = ContactParams::default();
        assert_eq!(contact_force(0.01, -5.0, 3.0, &p), (0.0, 0.0));
        assert_eq!(contact_force(0.0, -5.0, 3.0, &p), (0.0, 0.0));
    }

    #[test]
    fn static_penetration_spring_force() {
        let p = ContactParams::default();
        let (fn_, _) = contact_force(-0.001, 0.0, 0.0, &p);
        assert!((fn_ - 5.0).abs() < 1e-12);
    }

    #[test]
    fn separating_fast_clamps_to_zero() {
        let p = ContactParams::default();
        let (fn_, ft) = contact_force(-0.001, 1.0, 0.5, &p);
        assert_eq!(fn_, 0.0);
        assert_eq!(ft, 0.0);
    }

    proptest! {
        #[test]
        fn friction_cone_holds(h in -0.02f64..0.02, vy in -2.0f64..2.0, vx in -2.0f64..2.0) {
            let p = ContactParams::default();
            let (fn_, ft) = contact_force(h, vy, vx, &p);
            prop_assert!(fn_ >= 0.0);
            prop_assert!(ft.abs() <= p.friction_mu * fn_ + 1e-12);
        }

        #[test]
        fn friction_opposes_sliding(h in -0.02f64..-1e-6, vx in 1e-3f64..2.0) {
            let p = ContactParams::default();
            let (fn_, ft) = contact_force(h, 0.0, vx, &p);
            prop_assert!(fn_ > 0.0);
            prop_assert!(ft < 0.0);
        }
    }
}
