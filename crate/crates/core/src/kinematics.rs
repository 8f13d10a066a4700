//! Closed-form inverse kinematics and velocity Jacobians for the planar 3RRR
//! architecture.
//!
//! Frames and notation: world frame at the fixed-base origin, `x = (t, gamma)`
//! is the platform pose. Leg `i` runs base joint `b_i` -> elbow -> platform
//! anchor, with proximal direction `s_hat_i = (cos q_i, sin q_i)` and distal
//! direction `n_hat_i = (cos phi_i, sin phi_i)`. The loop closure per leg is
//!
//! ```text
//! t + R(gamma) p_i - L2 n_hat_i - L1 s_hat_i - b_i = 0
//! ```
//!
//! Velocity level: `A xdot = B qdot` and `C xdot = D phidot`, giving
//! `J_qx = B^-1 A`, `J_phix = D^-1 C` and `J_phiq = J_phix J_qx^-1`.

use crate::numeric::{condition_3x3, wrap_angle};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Condition-number ceiling above which a Jacobian factor counts as singular.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e8;

/// Leg distance below which the proximal/distal pair is treated as folded
/// onto the base joint (only possible when `l1 == l2`).
const FOLD_EPS: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("leg {leg}: platform anchor at distance {distance:.6} m outside reachable annulus [{min:.6}, {max:.6}] m")]
    Unreachable {
        leg: usize,
        distance: f64,
        min: f64,
        max: f64,
    },
    #[error("{matrix} is singular or ill-conditioned (condition estimate {cond:.3e})")]
    Singular { matrix: &'static str, cond: f64 },
}

/// Layout label carried by a geometry; purely descriptive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutTag {
    Wide,
    Narrow,
}

/// Fixed geometry of one 3RRR robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGeometry {
    /// Base joint positions in the world frame, m.
    pub base: [Vec2; 3],
    /// Platform anchor positions in the platform frame, m.
    pub platform_anchor: [Vec2; 3],
    /// Proximal link length, m.
    pub l1: f64,
    /// Distal link length, m.
    pub l2: f64,
    pub layout: LayoutTag,
}

fn circle_point(radius: f64, angle: f64) -> Vec2 {
    Vec2::new(radius * angle.cos(), radius * angle.sin())
}

impl RobotGeometry {
    /// Wide layout: base joints on a 0.25 m circle at 90deg/210deg/330deg,
    /// platform anchors on a 0.05 m circle at the same angles, 0.15 m links.
    pub fn wide_default() -> Self {
        let angles = [90f64, 210.0, 330.0].map(f64::to_radians);
        Self {
            base: angles.map(|a| circle_point(0.25, a)),
            platform_anchor: angles.map(|a| circle_point(0.05, a)),
            l1: 0.15,
            l2: 0.15,
            layout: LayoutTag::Wide,
        }
    }

    /// Narrow layout: base joints stacked on a vertical line left of the
    /// workspace, same platform and link dimensions as the wide layout. The
    /// x offset is chosen so the default task disk stays reachable across
    /// the +-30deg orientation sweep.
    pub fn narrow_default() -> Self {
        let anchor_angles = [90f64, 210.0, 330.0].map(f64::to_radians);
        Self {
            base: [
                Vec2::new(-0.13, 0.12),
                Vec2::new(-0.13, 0.0),
                Vec2::new(-0.13, -0.12),
            ],
            platform_anchor: anchor_angles.map(|a| circle_point(0.05, a)),
            l1: 0.15,
            l2: 0.15,
            layout: LayoutTag::Narrow,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.l1 > 0.0 && self.l1.is_finite()) || !(self.l2 > 0.0 && self.l2.is_finite()) {
            return Err(format!("link lengths must be positive, got l1={} l2={}", self.l1, self.l2));
        }
        for (i, b) in self.base.iter().enumerate() {
            if !b.x.is_finite() || !b.y.is_finite() {
                return Err(format!("base joint {i} has non-finite coordinates"));
            }
        }
        for (i, p) in self.platform_anchor.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(format!("platform anchor {i} has non-finite coordinates"));
            }
        }
        Ok(())
    }

    /// Upper bound on the distance from the origin to any reachable platform
    /// position; used to cap radial searches.
    pub fn max_reach_bound(&self) -> f64 {
        let b = self.base.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let p = self
            .platform_anchor
            .iter()
            .map(|p| p.norm())
            .fold(0.0, f64::max);
        b + self.l1 + self.l2 + p
    }
}

/// Platform pose: position of the platform frame origin plus orientation.
/// `gamma` is normalized to `(-pi, pi]` on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub gamma: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, gamma: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            gamma: wrap_angle(gamma),
        }
    }

    pub fn from_parts(position: Vec2, gamma: f64) -> Self {
        Self {
            position,
            gamma: wrap_angle(gamma),
        }
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.gamma.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    /// World position of platform anchor `i`.
    pub fn anchor_world(&self, geom: &RobotGeometry, i: usize) -> Vec2 {
        self.position + self.rotation() * geom.platform_anchor[i]
    }
}

/// Elbow branch selection. `Up` is the branch with positive 2D cross product
/// `s_hat x n_hat`; all study defaults use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElbowBranch {
    Up,
    Down,
}

impl ElbowBranch {
    fn beta_sign(self) -> f64 {
        match self {
            // q = psi - beta gives s_hat x n_hat >= 0
            ElbowBranch::Up => 1.0,
            ElbowBranch::Down => -1.0,
        }
    }
}

/// Joint solution for one pose: absolute link angles and unit directions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    /// Active (base) joint angles, rad.
    pub q: [f64; 3],
    /// Elbow joint absolute angles (direction of the distal link), rad.
    pub phi: [f64; 3],
    pub s_hat: [Vec2; 3],
    pub n_hat: [Vec2; 3],
    pub branch: ElbowBranch,
}

impl JointConfig {
    pub fn elbow_point(&self, geom: &RobotGeometry, i: usize) -> Vec2 {
        geom.base[i] + geom.l1 * self.s_hat[i]
    }
}

/// Closed-form two-link IK for all three legs on the requested elbow branch.
///
/// Errors with [`KinematicsError::Unreachable`] when an anchor falls outside
/// the annulus `[|l1 - l2|, l1 + l2]` around its base joint. The stretched
/// and folded boundaries themselves are reachable.
pub fn inverse_kinematics(
    pose: &Pose,
    geom: &RobotGeometry,
    branch: ElbowBranch,
) -> Result<JointConfig, KinematicsError> {
    let rot = pose.rotation();
    let mut q = [0.0; 3];
    let mut phi = [0.0; 3];
    let mut s_hat = [Vec2::zeros(); 3];
    let mut n_hat = [Vec2::zeros(); 3];
    let (min_d, max_d) = ((geom.l1 - geom.l2).abs(), geom.l1 + geom.l2);
    for i in 0..3 {
        let attach = pose.position + rot * geom.platform_anchor[i];
        let v = attach - geom.base[i];
        let d = v.norm();
        if d > max_d || d < min_d {
            return Err(KinematicsError::Unreachable {
                leg: i,
                distance: d,
                min: min_d,
                max: max_d,
            });
        }
        if d < FOLD_EPS {
            // Distal link folded back onto the proximal one; any q works,
            // pick zero for determinism.
            q[i] = 0.0;
            phi[i] = PI;
            s_hat[i] = Vec2::new(1.0, 0.0);
            n_hat[i] = Vec2::new(-1.0, 0.0);
            continue;
        }
        let psi = v.y.atan2(v.x);
        let cos_beta =
            ((geom.l1 * geom.l1 + d * d - geom.l2 * geom.l2) / (2.0 * geom.l1 * d)).clamp(-1.0, 1.0);
        let beta = cos_beta.acos();
        let qi = wrap_angle(psi - branch.beta_sign() * beta);
        let s = Vec2::new(qi.cos(), qi.sin());
        let w = v - geom.l1 * s;
        let phii = w.y.atan2(w.x);
        q[i] = qi;
        phi[i] = phii;
        s_hat[i] = s;
        n_hat[i] = Vec2::new(phii.cos(), phii.sin());
    }
    Ok(JointConfig {
        q,
        phi,
        s_hat,
        n_hat,
        branch,
    })
}

/// The Jacobian stack at one configuration.
///
/// `a, b` relate platform twist to active rates (`A xdot = B qdot`);
/// `c, d` relate it to elbow rates (`C xdot = D phidot`). The derived maps
/// are `j_qx = B^-1 A`, `j_phix = D^-1 C`, `j_phiq = j_phix * j_qx^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBundle {
    pub a: Mat3,
    pub b: Mat3,
    pub c: Mat3,
    pub d: Mat3,
    pub j_qx: Mat3,
    pub j_phix: Mat3,
    pub j_phiq: Mat3,
}

impl JacobianBundle {
    /// `J_xq = J_qx^-1`, the twist produced by unit active rates.
    pub fn j_xq(&self) -> Mat3 {
        // invertibility was established during construction
        self.j_qx
            .try_inverse()
            .expect("j_qx certified well-conditioned at construction")
    }
}

/// Builds the Jacobian stack with the default singularity threshold.
pub fn jacobians(
    pose: &Pose,
    joints: &JointConfig,
    geom: &RobotGeometry,
) -> Result<JacobianBundle, KinematicsError> {
    jacobians_with_limit(pose, joints, geom, DEFAULT_CONDITION_LIMIT)
}

/// Builds the Jacobian stack, rejecting configurations where `B`, `D` or
/// `J_qx` exceed the given condition-number limit.
pub fn jacobians_with_limit(
    pose: &Pose,
    joints: &JointConfig,
    geom: &RobotGeometry,
    cond_limit: f64,
) -> Result<JacobianBundle, KinematicsError> {
    let rot = pose.rotation();
    let mut a = Mat3::zeros();
    let mut b = Mat3::zeros();
    let mut c = Mat3::zeros();
    let mut d = Mat3::zeros();
    for i in 0..3 {
        let rp = rot * geom.platform_anchor[i];
        let s = joints.s_hat[i];
        let n = joints.n_hat[i];
        a[(i, 0)] = n.x;
        a[(i, 1)] = n.y;
        a[(i, 2)] = rp.perp(&n);
        b[(i, i)] = geom.l1 * s.perp(&n);
        c[(i, 0)] = s.x;
        c[(i, 1)] = s.y;
        c[(i, 2)] = rp.perp(&s);
        d[(i, i)] = geom.l2 * n.perp(&s);
    }
    check_diag_condition("B", &b, cond_limit)?;
    check_diag_condition("D", &d, cond_limit)?;
    let b_inv = diag_inverse(&b);
    let d_inv = diag_inverse(&d);
    let j_qx = b_inv * a;
    let cond = condition_3x3(&j_qx);
    if !(cond <= cond_limit) {
        return Err(KinematicsError::Singular {
            matrix: "J_qx",
            cond,
        });
    }
    let j_phix = d_inv * c;
    let j_xq = j_qx.try_inverse().ok_or(KinematicsError::Singular {
        matrix: "J_qx",
        cond,
    })?;
    let j_phiq = j_phix * j_xq;
    Ok(JacobianBundle {
        a,
        b,
        c,
        d,
        j_qx,
        j_phix,
        j_phiq,
    })
}

fn check_diag_condition(
    name: &'static str,
    m: &Mat3,
    cond_limit: f64,
) -> Result<(), KinematicsError> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..3 {
        let v = m[(i, i)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let cond = if lo == 0.0 { f64::INFINITY } else { hi / lo };
    if cond > cond_limit {
        return Err(KinematicsError::Singular { matrix: name, cond });
    }
    Ok(())
}

fn diag_inverse(m: &Mat3) -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(
        1.0 / m[(0, 0)],
        1.0 / m[(1, 1)],
        1.0 / m[(2, 2)],
    ))
}
