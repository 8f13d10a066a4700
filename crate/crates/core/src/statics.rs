//! Static torque model: gravitational and elastic potentials and the
//! actuator torque required to hold a pose.
//!
//! Potentials are differentiated through the closed kinematic chain, so a
//! gradient with respect to the active joints picks up the induced motion of
//! the elbows and the platform:
//!
//! ```text
//! tau_g = dV_g/dq + J_phiq^T dV_g/dphi + J_xq^T dV_g/dx
//! tau_e = K_q (q - q_f) + J_phiq^T K_phi (phi - phi_f)
//! tau   = tau_g + tau_e + (J_qx^T)^-1 w_e
//! ```
//!
//! Sign conventions: heights are measured along `-g_hat`, so raising a mass
//! increases `V_g`; the wrench term is oriented so that the static power
//! balance `tau . qdot = w_e . xdot` holds for a massless, spring-free robot.

use crate::kinematics::{JacobianBundle, JointConfig, KinematicsError, Pose, RobotGeometry};
use crate::numeric::wrap_angle;
use nalgebra::{Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Point-mass model of the moving parts. Link centers of mass sit at a
/// fixed fraction of the link length from the proximal end.
#[derive(Debug, Clone, PartialEq)]
pub struct MassModel {
    /// Proximal link masses per leg, kg.
    pub proximal: [f64; 3],
    /// Distal link masses per leg, kg.
    pub distal: [f64; 3],
    /// Platform mass (lumped at the platform frame origin), kg.
    pub platform: f64,
    /// Center-of-mass fractions along [proximal, distal] links.
    pub com_fraction: [f64; 2],
    /// Gravitational acceleration magnitude, m/s^2.
    pub gravity: f64,
    /// Unit gravity direction in the world frame.
    pub gravity_dir: Vec2,
}

impl MassModel {
    pub fn default_study() -> Self {
        Self {
            proximal: [0.10; 3],
            distal: [0.08; 3],
            platform: 0.20,
            com_fraction: [0.5, 0.5],
            gravity: 9.81,
            gravity_dir: Vec2::new(0.0, -1.0),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for m in self.proximal.iter().chain(self.distal.iter()) {
            if !(*m >= 0.0 && m.is_finite()) {
                return Err(format!("link masses must be >= 0, got {m}"));
            }
        }
        if !(self.platform >= 0.0 && self.platform.is_finite()) {
            return Err(format!("platform mass must be >= 0, got {}", self.platform));
        }
        for f in self.com_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("com fractions must lie in [0, 1], got {f}"));
            }
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(format!("gravity must be positive, got {}", self.gravity));
        }
        let n = self.gravity_dir.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(format!("gravity_dir must be a unit vector, |g_hat| = {n}"));
        }
        Ok(())
    }
}

/// Torsional springs at the active and elbow joints: stiffnesses and free
/// (unloaded) angles per leg. Stiffnesses are non-negative; a zero entry
/// means no spring at that joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringSet {
    pub k_q: [f64; 3],
    pub q_free: [f64; 3],
    pub k_phi: [f64; 3],
    pub phi_free: [f64; 3],
}

impl SpringSet {
    pub fn zero() -> Self {
        Self {
            k_q: [0.0; 3],
            q_free: [0.0; 3],
            k_phi: [0.0; 3],
            phi_free: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for k in self.k_q.iter().chain(self.k_phi.iter()) {
            if !(*k >= 0.0 && k.is_finite()) {
                return Err(format!("spring stiffnesses must be >= 0, got {k}"));
            }
        }
        for a in self.q_free.iter().chain(self.phi_free.iter()) {
            if !a.is_finite() {
                return Err("spring free angles must be finite".to_string());
            }
        }
        Ok(())
    }
}

/// Planar wrench applied by the environment at the platform frame origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec2,
    pub moment: f64,
}

impl Wrench {
    pub fn zero() -> Self {
        Self {
            force: Vec2::zeros(),
            moment: 0.0,
        }
    }

    pub fn as_vec3(&self) -> Vec3 {
        Vec3::new(self.force.x, self.force.y, self.moment)
    }
}

/// Gravitational potential of links and platform, J. Zero level is the
/// world origin; heights are measured along `-g_hat`.
pub fn gravity_potential(
    pose: &Pose,
    joints: &JointConfig,
    geom: &RobotGeometry,
    mass: &MassModel,
) -> f64 {
    let up = -mass.gravity_dir;
    let mut v = mass.platform * mass.gravity * pose.position.dot(&up);
    for i in 0..3 {
        let c_prox = geom.base[i] + mass.com_fraction[0] * geom.l1 * joints.s_hat[i];
        let c_dist = geom.base[i]
            + geom.l1 * joints.s_hat[i]
            + mass.com_fraction[1] * geom.l2 * joints.n_hat[i];
        v += mass.gravity * (mass.proximal[i] * c_prox.dot(&up) + mass.distal[i] * c_dist.dot(&up));
    }
    v
}

/// Partial derivatives of `V_g` with respect to `q`, `phi` and `x`, holding
/// the other coordinate groups fixed (chain-rule ingredients).
pub fn gravity_partials(
    joints: &JointConfig,
    geom: &RobotGeometry,
    mass: &MassModel,
) -> (Vec3, Vec3, Vec3) {
    let up = -mass.gravity_dir;
    let mut dq = Vec3::zeros();
    let mut dphi = Vec3::zeros();
    for i in 0..3 {
        let s_perp = Vec2::new(-joints.s_hat[i].y, joints.s_hat[i].x);
        let n_perp = Vec2::new(-joints.n_hat[i].y, joints.n_hat[i].x);
        dq[i] = mass.gravity
            * (mass.proximal[i] * mass.com_fraction[0] + mass.distal[i])
            * geom.l1
            * s_perp.dot(&up);
        dphi[i] = mass.gravity * mass.distal[i] * mass.com_fraction[1] * geom.l2 * n_perp.dot(&up);
    }
    let dx = Vec3::new(
        mass.platform * mass.gravity * up.x,
        mass.platform * mass.gravity * up.y,
        0.0,
    );
    (dq, dphi, dx)
}

/// Gravity torque at the active joints (holding torque with no springs and
/// no external wrench).
pub fn gravity_torque(
    joints: &JointConfig,
    jac: &JacobianBundle,
    geom: &RobotGeometry,
    mass: &MassModel,
) -> Vec3 {
    let (dq, dphi, dx) = gravity_partials(joints, geom, mass);
    dq + jac.j_phiq.transpose() * dphi + jac.j_xq().transpose() * dx
}

/// Spring deflection wrapped to `(-pi, pi]`; torsional springs respond to
/// the wrapped angle difference.
fn deflection(angle: f64, free: f64) -> f64 {
    wrap_angle(angle - free)
}

/// Elastic potential stored in both spring groups, J.
pub fn elastic_energy(joints: &JointConfig, springs: &SpringSet) -> f64 {
    let mut v = 0.0;
    for i in 0..3 {
        let dq = deflection(joints.q[i], springs.q_free[i]);
        let dphi = deflection(joints.phi[i], springs.phi_free[i]);
        v += 0.5 * (springs.k_q[i] * dq * dq + springs.k_phi[i] * dphi * dphi);
    }
    v
}

/// Elastic torque reflected to the active joints.
pub fn elastic_torque(joints: &JointConfig, springs: &SpringSet, jac: &JacobianBundle) -> Vec3 {
    let mut direct = Vec3::zeros();
    let mut elbow = Vec3::zeros();
    for i in 0..3 {
        direct[i] = springs.k_q[i] * deflection(joints.q[i], springs.q_free[i]);
        elbow[i] = springs.k_phi[i] * deflection(joints.phi[i], springs.phi_free[i]);
    }
    direct + jac.j_phiq.transpose() * elbow
}

/// Actuator torque required to hold the pose against gravity, springs and an
/// external wrench.
pub fn actuator_torque(
    joints: &JointConfig,
    jac: &JacobianBundle,
    geom: &RobotGeometry,
    mass: &MassModel,
    springs: &SpringSet,
    wrench: &Wrench,
) -> Result<Vec3, KinematicsError> {
    let tau_g = gravity_torque(joints, jac, geom, mass);
    let tau_e = elastic_torque(joints, springs, jac);
    let jt_inv = jac
        .j_qx
        .transpose()
        .try_inverse()
        .ok_or(KinematicsError::Singular {
            matrix: "J_qx",
            cond: f64::INFINITY,
        })?;
    Ok(tau_g + tau_e + jt_inv * wrench.as_vec3())
}
