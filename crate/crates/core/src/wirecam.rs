//! Wire-wrapped cam model: tangency geometry, wire length, forward torque,
//! and profile synthesis against a polynomial torque target.
//!
//! A cam with polar profile g(phi_tilde) spins about the origin by theta, so a
//! point at cam angle phi_tilde sits at world azimuth phi = phi_tilde + theta.
//! The wire leaves the cam at a tangency point, runs straight to an idler
//! pulley of radius r centered at d = (a, 0), wraps part of the idler, and
//! exits to a linear spring of stiffness k carrying pretension extension u_t.
//!
//! Tangency residual (solved for the world contact angle phi):
//!
//!     h(phi) = n_hat(phi) . (d - c(phi)) + eps * r
//!
//! with contact c = g*c_hat, surface tangent t_hat = (g' c_hat + g c_perp)/w,
//! w = sqrt(g^2 + g'^2), n_hat = z_hat x t_hat, and eps = -1 for an external
//! tangent (cases One, Two) or +1 for an internal one (cases Three, Four).
//! Cases One/Three search phi in [-pi, 0]; Two/Four search [0, pi] and are
//! solved by reflecting the profile across the x axis, which maps them onto
//! One/Three at rotation -theta.
//!
//! Wire length for cases One/Three (attachment at cam angle phi_0 behind the
//! contact, phi_0 <= phi_tilde_c):
//!
//!     L = lambda + eps*r*(beta - beta_exit) + integral_{phi_0}^{phi_tilde_c} w dphi
//!
//! where lambda is the free-span length, beta the idler contact azimuth and
//! beta_exit = -pi/2 a fixed exit reference. Contact-sliding terms cancel
//! between the span, the idler arc and the wrapped arc, leaving the exact
//!
//!     dL/dtheta = n_hat . c = -g^2 / w        (evaluated at the contact)
//!
//! so a circular cam pays wire at rate -g0 in these cases and +g0 in the
//! reflected cases Two/Four. Forward torque about the cam axis is
//!
//!     tau = k * (u_t + L - L_ref) * dL/dtheta
//!
//! which matches the derivative of the stored spring energy 0.5*k*u^2.
//!
//! Synthesis inverts this chain for a positive torque target f(alpha) in the
//! case Two convention (payout grows with alpha): the moment arm must be
//! m = f / (k*u) with u = sqrt(u_t^2 + 2*I/k), I the running integral of f,
//! and the span line has normal angle nu = acos((r - m)/a) in world. Pulling
//! the one-parameter line family back into the cam frame and taking its
//! envelope yields the contact locus, hence the profile. Negative targets are
//! synthesized on the mirror image (alpha -> -alpha, f -> -f) and evaluated
//! through the `mirrored` flag, which corresponds to the case One wrap.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector2;
use thiserror::Error;

use crate::kinematics::{Pose, RobotGeometry, Vec2, Vec3};
use crate::numeric::{adaptive_simpson, brent_root, CubicSpline};
use crate::statics::MassModel;
use crate::spring_opt::{e_tau, PathStatics, SpringOptError};

/// Idler exit azimuth used as the zero reference of the idler wrap arc.
pub const BETA_EXIT: f64 = -FRAC_PI_2;
/// Wire extensions below this are reported as a slack wire.
pub const SLACK_TOL: f64 = -1e-12;
/// Maximum tangency residual accepted for a converged contact angle.
pub const TANGENCY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CamError {
    #[error("invalid cam geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid cam profile: {0}")]
    InvalidProfile(String),
    #[error("no wire tangency at rotation {theta:.6} rad")]
    NoTangent { theta: f64 },
    #[error("ambiguous wire tangency at rotation {theta:.6} rad: roots {roots:?}")]
    MultipleTangents { theta: f64, roots: Vec<f64> },
    #[error("attachment angle {attach:.6} lies past the contact angle {contact:.6}")]
    AttachmentPassed { attach: f64, contact: f64 },
    #[error("wrapped-arc quadrature failed to converge")]
    QuadratureFailure,
    #[error("wire goes slack: extension {extension:.3e} m")]
    SlackWire { extension: f64 },
    #[error("torque target infeasible at cam angle {alpha:.6}: stored energy depleted")]
    InfeasibleTorque { alpha: f64 },
    #[error("moment arm {arm:.6} at cam angle {alpha:.6} leaves the feasible band (r, a)")]
    GeometryInfeasible { alpha: f64, arm: f64 },
    #[error("cam synthesis diverged: {0}")]
    SynthesisDiverged(String),
    #[error("torque fit is rank deficient: rank {rank} < {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("cam angle {alpha:.6} outside designed range [{lo:.6}, {hi:.6}]")]
    RangeExceeded { alpha: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Spring(#[from] SpringOptError),
}

/// Wire routing case: external/internal idler tangent, lower/upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireCase {
    /// External tangent, contact azimuth in [-pi, 0].
    One,
    /// External tangent, contact azimuth in [0, pi] (mirror of One).
    Two,
    /// Internal tangent, contact azimuth in [-pi, 0].
    Three,
    /// Internal tangent, contact azimuth in [0, pi] (mirror of Three).
    Four,
}

impl WireCase {
    /// Idler-side sign in the tangency residual.
    pub fn epsilon(self) -> f64 {
        match self {
            WireCase::One | WireCase::Two => -1.0,
            WireCase::Three | WireCase::Four => 1.0,
        }
    }

    /// True for the upper-half-plane cases solved through the y reflection.
    pub fn reflected(self) -> bool {
        matches!(self, WireCase::Two | WireCase::Four)
    }

    /// The lower-half-plane case this one reduces to under reflection.
    fn primitive(self) -> WireCase {
        match self {
            WireCase::One | WireCase::Two => WireCase::One,
            WireCase::Three | WireCase::Four => WireCase::Three,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            WireCase::One => 1,
            WireCase::Two => 2,
            WireCase::Three => 3,
            WireCase::Four => 4,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(WireCase::One),
            2 => Some(WireCase::Two),
            3 => Some(WireCase::Three),
            4 => Some(WireCase::Four),
            _ => None,
        }
    }
}

/// Fixed hardware around one cam: idler offset `a`, idler radius `r`, spring
/// rate `k`, pretension extension `u_t` and the mounting offset `q0` mapping
/// the actuated joint angle to the cam angle alpha = pi/2 - (q - q0).
#[derive(Debug, Clone, Copy)]
pub struct WireCamGeometry {
    pub a: f64,
    pub r: f64,
    pub k: f64,
    pub u_t: f64,
    pub q0: f64,
}

impl WireCamGeometry {
    pub fn validate(&self) -> Result<(), CamError> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(CamError::InvalidGeometry(format!(
                "idler offset a = {} must be positive",
                self.a
            )));
        }
        if !(self.r.is_finite() && self.r > 0.0 && self.r < self.a) {
            return Err(CamError::InvalidGeometry(format!(
                "idler radius r = {} must satisfy 0 < r < a = {}",
                self.r, self.a
            )));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(CamError::InvalidGeometry(format!(
                "spring rate k = {} must be positive",
                self.k
            )));
        }
        if !(self.u_t.is_finite() && self.u_t >= 0.0) {
            return Err(CamError::InvalidGeometry(format!(
                "pretension u_t = {} must be nonnegative",
                self.u_t
            )));
        }
        if !self.q0.is_finite() {
            return Err(CamError::InvalidGeometry("q0 must be finite".into()));
        }
        Ok(())
    }
}

/// Cam angle seen by the wire for actuated joint angle `q`.
pub fn cam_angle(q: f64, q0: f64) -> f64 {
    FRAC_PI_2 - (q - q0)
}

/// Polar cam profile g(phi_tilde) on strictly increasing sample angles,
/// interpolated by a natural cubic spline.
#[derive(Debug, Clone)]
pub struct CamProfile {
    phi: Vec<f64>,
    g: Vec<f64>,
    spline: CubicSpline,
}

impl CamProfile {
    pub fn from_samples(phi: Vec<f64>, g: Vec<f64>) -> Result<Self, CamError> {
        if phi.len() != g.len() || phi.len() < 4 {
            return Err(CamError::InvalidProfile(format!(
                "need >= 4 matching samples, got {} angles / {} radii",
                phi.len(),
                g.len()
            )));
        }
        if phi.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CamError::InvalidProfile(
                "sample angles must be strictly increasing".into(),
            ));
        }
        if g.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(CamError::InvalidProfile(
                "radii must be finite and positive".into(),
            ));
        }
        let spline = CubicSpline::new(phi.clone(), g.clone())
            .map_err(|e| CamError::InvalidProfile(e.into()))?;
        Ok(Self { phi, g, spline })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.spline.domain()
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.phi, &self.g)
    }

    /// Radius and slope dg/dphi at cam angle `phi_tilde`.
    pub fn radius_and_slope(&self, phi_tilde: f64) -> (f64, f64) {
        self.spline.eval_with_slope(phi_tilde)
    }

    /// Profile mirrored across the x axis: g_m(phi) = g(-phi).
    pub fn mirrored(&self) -> Self {
        let phi: Vec<f64> = self.phi.iter().rev().map(|p| -p).collect();
        let g: Vec<f64> = self.g.iter().rev().cloned().collect();
        let spline = CubicSpline::new(phi.clone(), g.clone())
            .expect("mirror of a valid profile is valid");
        Self { phi, g, spline }
    }
}

/// Converged wire tangency. For the reflected cases the frame is mapped back
/// so that `contact`, `tangent` and `normal` are world-frame quantities with
/// `lambda > 0` along `tangent` toward the idler and `normal = z_hat x tangent`.
#[derive(Debug, Clone, Copy)]
pub struct TangencySolution {
    pub case: WireCase,
    /// World azimuth of the contact point.
    pub phi: f64,
    /// Cam-frame angle of the contact point, phi - theta.
    pub phi_cam: f64,
    /// Free span length from contact to the idler tangent point.
    pub lambda: f64,
    pub contact: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
}

/// World azimuth window searched for the contact angle.
pub fn tangency_window(
    profile: &CamProfile,
    theta: f64,
    case: WireCase,
) -> (f64, f64) {
    if case.reflected() {
        let (lo, hi) = tangency_window(&profile.mirrored(), -theta, case.primitive());
        (-hi, -lo)
    } else {
        let (dom_lo, dom_hi) = profile.domain();
        ((-PI).max(theta + dom_lo), 0f64.min(theta + dom_hi))
    }
}

/// Tangency residual h at world angle `phi`. For the reflected cases this is
/// the residual of the mirrored problem evaluated at `-phi`, which is the
/// function whose root `wire_tangency` actually returns.
pub fn tangency_residual(
    profile: &CamProfile,
    theta: f64,
    geom: &WireCamGeometry,
    case: WireCase,
    phi: f64,
) -> f64 {
    if case.reflected() {
        tangency_residual(&profile.mirrored(), -theta, geom, case.primitive(), -phi)
    } else {
        residual_primitive(profile, theta, geom, case.epsilon(), phi)
    }
}

fn residual_primitive(
    profile: &CamProfile,
    theta: f64,
    geom: &WireCamGeometry,
    eps: f64,
    phi: f64,
) -> f64 {
    let frame = surface_frame(profile, theta, phi);
    let d = Vector2::new(geom.a, 0.0);
    frame.normal.dot(&(d - frame.contact)) + eps * geom.r
}

struct SurfaceFrame {
    contact: Vec2,
    tangent: Vec2,
    normal: Vec2,
    g: f64,
    w: f64,
}

fn surface_frame(profile: &CamProfile, theta: f64, phi: f64) -> SurfaceFrame {
    let (g, gp) = profile.radius_and_slope(phi - theta);
    let c_hat = Vector2::new(phi.cos(), phi.sin());
    let c_perp = Vector2::new(-phi.sin(), phi.cos());
    let contact = g * c_hat;
    let w = (g * g + gp * gp).sqrt();
    let tangent = (gp * c_hat + g * c_perp) / w;
    let normal = Vector2::new(-tangent.y, tangent.x);
    SurfaceFrame {
        contact,
        tangent,
        normal,
        g,
        w,
    }
}

/// Solve for the wire tangency at cam rotation `theta`.
pub fn wire_tangency(
    profile: &CamProfile,
    theta: f64,
    geom: &WireCamGeometry,
    case: WireCase,
) -> Result<TangencySolution, CamError> {
    geom.validate()?;
    if case.reflected() {
        let sol = tangency_primitive(&profile.mirrored(), -theta, geom, case.primitive())?;
        // Reflection across x: angles negate, the frame is remapped so the
        // span still runs from the contact toward the idler with lambda > 0.
        return Ok(TangencySolution {
            case,
            phi: -sol.phi,
            phi_cam: -sol.phi_cam,
            lambda: sol.lambda,
            contact: Vector2::new(sol.contact.x, -sol.contact.y),
            tangent: Vector2::new(sol.tangent.x, -sol.tangent.y),
            normal: Vector2::new(-sol.normal.x, sol.normal.y),
        });
    }
    tangency_primitive(profile, theta, geom, case)
}

fn tangency_primitive(
    profile: &CamProfile,
    theta: f64,
    geom: &WireCamGeometry,
    case: WireCase,
) -> Result<TangencySolution, CamError> {
    let eps = case.epsilon();
    let (dom_lo, dom_hi) = profile.domain();
    let lo = (-PI).max(theta + dom_lo);
    let hi = 0f64.min(theta + dom_hi);
    if hi - lo < 1e-9 {
        return Err(CamError::NoTangent { theta });
    }
    let h = |phi: f64| residual_primitive(profile, theta, geom, eps, phi);

    const SCAN: usize = 400;
    let step = (hi - lo) / SCAN as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_x = lo;
    let mut prev_h = h(lo);
    for j in 1..=SCAN {
        let x = lo + step * j as f64;
        let hx = h(x);
        if prev_h == 0.0 {
            push_root(&mut roots, prev_x);
        } else if prev_h.signum() != hx.signum() {
            if let Some(root) = brent_root(h, prev_x, x, prev_h, hx, 1e-14, 200) {
                push_root(&mut roots, root);
            }
        }
        prev_x = x;
        prev_h = hx;
    }
    if prev_h == 0.0 {
        push_root(&mut roots, prev_x);
    }

    // A root with the idler behind the surface direction is a line tangency
    // on the wrong side of the cam, not a wire route.
    let d = Vector2::new(geom.a, 0.0);
    roots.retain(|&phi| {
        let f = surface_frame(profile, theta, phi);
        f.tangent.dot(&(d - f.contact)) > 1e-12
    });

    match roots.len() {
        0 => Err(CamError::NoTangent { theta }),
        1 => {
            let mut phi = roots[0];
            // Polish until the residual meets the contract tolerance.
            if h(phi).abs() > TANGENCY_TOL {
                let (mut a, mut b) = ((phi - step).max(lo), (phi + step).min(hi));
                let mut fa = h(a);
                if fa.signum() != h(b).signum() {
                    for _ in 0..80 {
                        let m = 0.5 * (a + b);
                        let fm = h(m);
                        if fm == 0.0 {
                            break;
                        }
                        if fm.signum() == fa.signum() {
                            a = m;
                            fa = fm;
                        } else {
                            b = m;
                        }
                    }
                    phi = 0.5 * (a + b);
                }
            }
            let f = surface_frame(profile, theta, phi);
            Ok(TangencySolution {
                case,
                phi,
                phi_cam: phi - theta,
                lambda: f.tangent.dot(&(d - f.contact)),
                contact: f.contact,
                tangent: f.tangent,
                normal: f.normal,
            })
        }
        _ => Err(CamError::MultipleTangents { theta, roots }),
    }
}

fn push_root(roots: &mut Vec<f64>, root: f64) {
    if roots.iter().all(|r| (r - root).abs() > 1e-6) {
        roots.push(root);
    }
}

/// Wire length and its exact rate of change with cam rotation.
///
/// For cases One/Three the attachment angle must trail the contact
/// (`attach <= phi_cam`) and the payout rate is negative; the reflected
/// cases require `attach >= phi_cam` and pay out positively.
pub fn wire_length_rate(
    profile: &CamProfile,
    theta: f64,
    geom: &WireCamGeometry,
    case: WireCase,
    attach: f64,
) -> Result<(f64, f64), CamError> {
    if case.reflected() {
        let (l, rate) =
            wire_length_rate(&profile.mirrored(), -theta, geom, case.primitive(), -attach)?;
        return Ok((l, -rate));
    }
    geom.validate()?;
    let (dom_lo, dom_hi) = profile.domain();
    if attach < dom_lo - 1e-9 || attach > dom_hi + 1e-9 {
        return Err(CamError::InvalidProfile(format!(
            "attachment angle {attach} outside profile domain [{dom_lo}, {dom_hi}]"
        )));
    }
    let sol = tangency_primitive(profile, theta, geom, case)?;
    if attach > sol.phi_cam + 1e-9 {
        return Err(CamError::AttachmentPassed {
            attach,
            contact: sol.phi_cam,
        });
    }
    let eps = case.epsilon();
    // Idler tangent point and wrap azimuth.
    let d = Vector2::new(geom.a, 0.0);
    let e = sol.contact + sol.lambda * sol.tangent;
    let wv = e - d;
    let beta = wv.y.atan2(wv.x);
    let arc_fun = |p: f64| {
        let (g, gp) = profile.radius_and_slope(p);
        (g * g + gp * gp).sqrt()
    };
    let span = (sol.phi_cam - attach).abs().max(1.0);
    let arc = adaptive_simpson(&arc_fun, attach, sol.phi_cam, 1e-12 * span, 48)
        .ok_or(CamError::QuadratureFailure)?;
    let l = sol.lambda + eps * geom.r * (beta - BETA_EXIT) + arc;
    // Sliding terms cancel between span, idler arc and wrapped arc, so the
    // rate reduces to the line offset n.c = -g^2/w at the contact.
    let frame = surface_frame(profile, theta, sol.phi);
    let rate = -frame.g * frame.g / frame.w;
    Ok((l, rate))
}

/// Wire length only (see `wire_length_rate`).
pub fn wire_length(
    profile: &CamProfile,
    theta: f64,
    geom: &WireCamGeometry,
    case: WireCase,
    attach: f64,
) -> Result<f64, CamError> {
    wire_length_rate(profile, theta, geom, case, attach).map(|(l, _)| l)
}

/// Torque about the cam axis produced by the stretched wire at rotation
/// `theta`, with `l_ref` the wire length at the pretension reference.
pub fn cam_torque_forward(
    profile: &CamProfile,
    theta: f64,
    geom: &WireCamGeometry,
    case: WireCase,
    attach: f64,
    l_ref: f64,
) -> Result<f64, CamError> {
    let (l, rate) = wire_length_rate(profile, theta, geom, case, attach)?;
    let u = geom.u_t + (l - l_ref);
    if u < SLACK_TOL {
        return Err(CamError::SlackWire { extension: u });
    }
    Ok(geom.k * u * rate)
}

/// Polynomial torque model in the cam angle, coefficients in ascending powers.
#[derive(Debug, Clone)]
pub struct ModalTorque {
    pub coeffs: Vec<f64>,
}

impl ModalTorque {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * alpha + c)
    }

    pub fn eval_with_derivative(&self, alpha: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for c in self.coeffs.iter().rev() {
            dv = dv * alpha + v;
            v = v * alpha + c;
        }
        (v, dv)
    }

    /// The model with every coefficient negated.
    pub fn negated(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    /// The pullback alpha -> -alpha of the negated model: f'(a) = -f(-a).
    pub fn mirror(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 0 { -c } else { *c })
                .collect(),
        }
    }
}

/// Least-squares polynomial fit of torque samples over the cam angle.
pub fn fit_modal_torque(
    alphas: &[f64],
    torques: &[f64],
    order: usize,
) -> Result<ModalTorque, CamError> {
    let n = alphas.len();
    let cols = order + 1;
    if n != torques.len() || n < cols {
        return Err(CamError::RankDeficient {
            rank: n.min(torques.len()),
            needed: cols,
        });
    }
    let mut vander = nalgebra::DMatrix::zeros(n, cols);
    for (i, &a) in alphas.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..cols {
            vander[(i, j)] = p;
            p *= a;
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(torques);
    let svd = vander.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12 * n.max(cols) as f64;
    let rank = svd.rank(tol);
    if rank < cols {
        return Err(CamError::RankDeficient { rank, needed: cols });
    }
    let sol = svd
        .solve(&rhs, tol)
        .map_err(|e| CamError::SynthesisDiverged(e.to_string()))?;
    Ok(ModalTorque::new(sol.iter().cloned().collect()))
}

/// Torque the cam must produce to cancel a fitted gravity torque model.
pub fn desired_cam_torque(gravity_fit: &ModalTorque) -> ModalTorque {
    gravity_fit.negated()
}

/// A synthesized cam: profile plus everything needed to evaluate its torque.
///
/// The profile is stored in the lower-half-plane (case One) parametrization;
/// `torque_at` evaluates it through the reflected (case Two) payout
/// convention, with an extra mirror in alpha when `mirrored` is set.
#[derive(Debug, Clone)]
pub struct WireCamDesign {
    pub profile: CamProfile,
    pub geom: WireCamGeometry,
    /// Wire attachment angle on the stored profile.
    pub attach: f64,
    /// Wire length at the reference cam angle (pretension datum).
    pub l_ref: f64,
    /// Valid evaluation range in the internal cam angle.
    alpha_range: (f64, f64),
    /// Public torque is evaluated at the reflected cam angle.
    pub mirrored: bool,
    /// Wrap case the as-built cam corresponds to.
    pub case: WireCase,
}

impl WireCamDesign {
    /// Designed cam-angle range in the caller's (public) convention.
    pub fn public_alpha_range(&self) -> (f64, f64) {
        if self.mirrored {
            (-self.alpha_range.1, -self.alpha_range.0)
        } else {
            self.alpha_range
        }
    }

    /// Torque delivered at cam angle `alpha`.
    pub fn torque_at(&self, alpha: f64) -> Result<f64, CamError> {
        let a = if self.mirrored { -alpha } else { alpha };
        let (lo, hi) = self.alpha_range;
        if a < lo - 1e-9 || a > hi + 1e-9 {
            let (plo, phi_) = self.public_alpha_range();
            return Err(CamError::RangeExceeded {
                alpha,
                lo: plo,
                hi: phi_,
            });
        }
        // Case Two payout on the internal case One representation.
        let (l, rate) =
            wire_length_rate(&self.profile, -a, &self.geom, WireCase::One, self.attach)?;
        let u = self.geom.u_t + (l - self.l_ref);
        if u < SLACK_TOL {
            return Err(CamError::SlackWire { extension: u });
        }
        let t = self.geom.k * u * (-rate);
        Ok(if self.mirrored { -t } else { t })
    }

    /// Wire extension at cam angle `alpha`.
    pub fn extension_at(&self, alpha: f64) -> Result<f64, CamError> {
        let a = if self.mirrored { -alpha } else { alpha };
        let (l, _) =
            wire_length_rate(&self.profile, -a, &self.geom, WireCase::One, self.attach)?;
        Ok(self.geom.u_t + (l - self.l_ref))
    }
}

/// Synthesize a cam profile whose wire torque reproduces `desired` over the
/// cam-angle range `[alpha_lo, alpha_hi]`.
pub fn synthesize_cam_profile(
    desired: &ModalTorque,
    alpha_lo: f64,
    alpha_hi: f64,
    geom: &WireCamGeometry,
    samples: usize,
) -> Result<WireCamDesign, CamError> {
    geom.validate()?;
    if !(alpha_hi > alpha_lo + 1e-6) {
        return Err(CamError::InvalidGeometry(format!(
            "cam angle range [{alpha_lo}, {alpha_hi}] is empty"
        )));
    }
    if samples < 16 {
        return Err(CamError::InvalidGeometry(format!(
            "need >= 16 synthesis samples, got {samples}"
        )));
    }
    let mid = desired.eval(0.5 * (alpha_lo + alpha_hi));
    if mid < 0.0 {
        // Negative targets: build the mirror cam for f_m(a) = -f(-a) over the
        // reflected range and evaluate through the mirrored flag (case One).
        let inner = synthesize_positive(
            &desired.mirror(),
            -alpha_hi,
            -alpha_lo,
            geom,
            samples,
        )?;
        return Ok(WireCamDesign {
            mirrored: true,
            case: WireCase::One,
            ..inner
        });
    }
    synthesize_positive(desired, alpha_lo, alpha_hi, geom, samples)
}

fn synthesize_positive(
    desired: &ModalTorque,
    alpha_lo: f64,
    alpha_hi: f64,
    geom: &WireCamGeometry,
    samples: usize,
) -> Result<WireCamDesign, CamError> {
    let span = alpha_hi - alpha_lo;
    let step = span / (samples - 1) as f64;
    // Pad the sampled range so tangency stays interior at the requested ends.
    let n_pad = ((0.03 / step).ceil() as usize).clamp(4, samples);
    let total = samples + 2 * n_pad;
    let grid: Vec<f64> = (0..total)
        .map(|j| alpha_lo + step * (j as isize - n_pad as isize) as f64)
        .collect();

    // Running energy integral I(alpha) of the target from alpha_lo, composite
    // Simpson on sample midpoints (the target is polynomial, hence smooth).
    let mut integral = vec![0.0; total];
    for j in 1..total {
        let (a0, a1) = (grid[j - 1], grid[j]);
        let m = 0.5 * (a0 + a1);
        let seg = (a1 - a0) / 6.0
            * (desired.eval(a0) + 4.0 * desired.eval(m) + desired.eval(a1));
        integral[j] = integral[j - 1] + seg;
    }
    let i_ref = integral[n_pad];

    let mut phi_cam = Vec::with_capacity(total);
    let mut radius = Vec::with_capacity(total);
    let requested = |j: usize| j >= n_pad && j < n_pad + samples;
    let mut lo_cut = 0usize;
    for j in 0..total {
        let alpha = grid[j];
        let (f, fp) = desired.eval_with_derivative(alpha);
        let u_sq = geom.u_t * geom.u_t + 2.0 * (integral[j] - i_ref) / geom.k;
        if u_sq <= 1e-16 {
            if requested(j) {
                return Err(CamError::InfeasibleTorque { alpha });
            }
            if j < n_pad {
                lo_cut = j + 1;
                phi_cam.push(f64::NAN);
                radius.push(f64::NAN);
                continue;
            }
            break;
        }
        let u = u_sq.sqrt();
        let m = f / (geom.k * u);
        if m <= geom.r * (1.0 + 1e-9) || m >= geom.a * (1.0 - 1e-9) {
            if requested(j) {
                return Err(CamError::GeometryInfeasible { alpha, arm: m });
            }
            if j < n_pad {
                lo_cut = j + 1;
                phi_cam.push(f64::NAN);
                radius.push(f64::NAN);
                continue;
            }
            break;
        }
        let mp = (fp / geom.k - m * m) / u;
        let w = (geom.r - m) / geom.a;
        let nu = w.acos();
        let nu_p = (mp / geom.a) / (1.0 - w * w).sqrt();
        // Envelope of the line family n(nu_tilde).x = p in the cam frame.
        let nu_t = nu + alpha;
        let nu_t_p = nu_p + 1.0;
        if nu_t_p.abs() < 1e-9 {
            return Err(CamError::SynthesisDiverged(format!(
                "stationary line family at cam angle {alpha:.6}"
            )));
        }
        let p = -m;
        let pp = -mp;
        let n_t = Vector2::new(nu_t.cos(), nu_t.sin());
        let n_perp = Vector2::new(-nu_t.sin(), nu_t.cos());
        let x = p * n_t + (pp / nu_t_p) * n_perp;
        phi_cam.push(x.y.atan2(x.x));
        radius.push(x.norm());
    }

    // Requested-range infeasibility errors out above, so lo_cut <= n_pad and
    // everything up to n_pad + samples was pushed; only pads can be trimmed.
    let kept_pad_lo = n_pad - lo_cut;
    let kept_pad_hi = phi_cam.len().saturating_sub(n_pad + samples);
    if kept_pad_lo < 2 || kept_pad_hi < 2 {
        return Err(CamError::SynthesisDiverged(
            "target is feasible only marginally beyond the requested range".into(),
        ));
    }
    let phi_cam = &phi_cam[lo_cut..];
    let radius = &radius[lo_cut..];

    // Unwrap the contact angles and require a monotone locus.
    let mut phi_unwrapped = Vec::with_capacity(phi_cam.len());
    let mut offset = 0.0;
    for (j, &p) in phi_cam.iter().enumerate() {
        if j > 0 {
            let prev: f64 = phi_unwrapped[j - 1];
            let mut cur = p + offset;
            while cur - prev > PI {
                cur -= 2.0 * PI;
                offset -= 2.0 * PI;
            }
            while prev - cur > PI {
                cur += 2.0 * PI;
                offset += 2.0 * PI;
            }
            phi_unwrapped.push(cur);
        } else {
            phi_unwrapped.push(p);
        }
    }
    if phi_unwrapped.windows(2).any(|w| w[1] <= w[0] + 1e-12) {
        return Err(CamError::SynthesisDiverged(
            "contact locus is not monotone in the cam angle".into(),
        ));
    }

    // atan2 fixes each angle only up to 2*pi; pin the branch by requiring the
    // first contact to sit in the case One world window at its own rotation.
    let alpha_first = grid[lo_cut];
    let w0 = phi_unwrapped[0] - alpha_first;
    let branch_shift = crate::numeric::wrap_angle(w0) - w0;
    if branch_shift != 0.0 {
        for p in &mut phi_unwrapped {
            *p += branch_shift;
        }
    }

    let profile = CamProfile::from_samples(phi_unwrapped.clone(), radius.to_vec())?;
    let attach = phi_unwrapped[0];
    // Reference length at alpha_lo through the forward machinery itself, so
    // the pretension datum is exactly consistent with later evaluations.
    let (l_ref, _) = wire_length_rate(&profile, -alpha_lo, geom, WireCase::One, attach)?;

    let design = WireCamDesign {
        profile,
        geom: *geom,
        attach,
        l_ref,
        alpha_range: (alpha_lo, alpha_hi),
        mirrored: false,
        case: WireCase::Two,
    };

    // Round-trip audit: the as-built torque must reproduce the target.
    let n_check = 41;
    let mut err_sq = 0.0;
    let mut ref_sq = 0.0;
    for j in 0..n_check {
        let alpha = alpha_lo + span * j as f64 / (n_check - 1) as f64;
        let want = desired.eval(alpha);
        let got = design.torque_at(alpha)?;
        err_sq += (got - want) * (got - want);
        ref_sq += want * want;
    }
    let rel = (err_sq / ref_sq.max(1e-300)).sqrt();
    if rel > 5e-3 {
        return Err(CamError::SynthesisDiverged(format!(
            "round-trip torque error {rel:.3e} exceeds 5e-3"
        )));
    }
    Ok(design)
}

/// Residual torque along a path when each actuated joint carries its cam.
#[derive(Debug, Clone)]
pub struct CamBalanceReport {
    /// Gravity torque with no balancing elements.
    pub baseline: Vec<Vec3>,
    /// Gravity torque plus cam torque, per pose.
    pub residual: Vec<Vec3>,
    /// Cam angle of each leg per pose.
    pub alpha: Vec<Vec3>,
    /// Per-leg RMS torque ratio against the baseline.
    pub e_tau: [f64; 3],
}

/// Evaluate the cams of all three legs along a path.
pub fn balance_with_cams(
    path: &[Pose],
    geom: &RobotGeometry,
    mass: &MassModel,
    designs: &[WireCamDesign; 3],
) -> Result<CamBalanceReport, CamError> {
    let stats = PathStatics::compute(path, geom, mass)?;
    let mut residual = Vec::with_capacity(stats.len());
    let mut alpha_tab = Vec::with_capacity(stats.len());
    for j in 0..stats.len() {
        let mut row = stats.tau_g[j];
        let mut arow = Vec3::zeros();
        for i in 0..3 {
            let alpha = cam_angle(stats.q[j][i], designs[i].geom.q0);
            arow[i] = alpha;
            row[i] += designs[i].torque_at(alpha)?;
        }
        residual.push(row);
        alpha_tab.push(arow);
    }
    let e = e_tau(&residual, &stats.tau_g)?;
    Ok(CamBalanceReport {
        baseline: stats.tau_g.clone(),
        residual,
        alpha: alpha_tab,
        e_tau: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn circle(g0: f64) -> CamProfile {
        let n = 241;
        let phi: Vec<f64> = (0..n)
            .map(|j| -PI + 2.0 * PI * j as f64 / (n - 1) as f64)
            .collect();
        let g = vec![g0; n];
        CamProfile::from_samples(phi, g).unwrap()
    }

    fn test_geom() -> WireCamGeometry {
        WireCamGeometry {
            a: 0.25,
            r: 0.04,
            k: 200.0,
            u_t: 0.05,
            q0: 0.0,
        }
    }

    #[test]
    fn cam_angle_is_affine_in_q() {
        assert_abs_diff_eq!(cam_angle(0.3, 0.3), FRAC_PI_2);
        assert_abs_diff_eq!(cam_angle(0.5, 0.2), FRAC_PI_2 - 0.3);
        // dalpha/dq = -1
        let d = cam_angle(0.5 + 1e-3, 0.2) - cam_angle(0.5, 0.2);
        assert_abs_diff_eq!(d, -1e-3, epsilon = 1e-15);
    }

    #[test]
    fn circular_tangency_matches_closed_forms() {
        let g0 = 0.1;
        let geom = test_geom();
        let prof = circle(g0);

        // External tangent, lower half plane.
        let s1 = wire_tangency(&prof, 0.0, &geom, WireCase::One).unwrap();
        let expect = -((g0 - geom.r) / geom.a).acos();
        assert_abs_diff_eq!(s1.phi, expect, epsilon = 1e-9);
        let lam = (geom.a * geom.a - (g0 - geom.r) * (g0 - geom.r)).sqrt();
        assert_relative_eq!(s1.lambda, lam, max_relative = 1e-9);
        assert!(tangency_residual(&prof, 0.0, &geom, WireCase::One, s1.phi).abs() <= TANGENCY_TOL);

        // Internal tangent, lower half plane.
        let s3 = wire_tangency(&prof, 0.0, &geom, WireCase::Three).unwrap();
        assert_abs_diff_eq!(s3.phi, -((g0 + geom.r) / geom.a).acos(), epsilon = 1e-9);
        let lam3 = (geom.a * geom.a - (g0 + geom.r) * (g0 + geom.r)).sqrt();
        assert_relative_eq!(s3.lambda, lam3, max_relative = 1e-9);

        // Reflected cases land at the mirror root with the same span length.
        let s2 = wire_tangency(&prof, 0.0, &geom, WireCase::Two).unwrap();
        assert_abs_diff_eq!(s2.phi, -expect, epsilon = 1e-9);
        assert_relative_eq!(s2.lambda, lam, max_relative = 1e-9);
        assert!(tangency_residual(&prof, 0.0, &geom, WireCase::Two, s2.phi).abs() <= TANGENCY_TOL);
        assert!(s2.lambda > 0.0);
        let s4 = wire_tangency(&prof, 0.0, &geom, WireCase::Four).unwrap();
        assert_abs_diff_eq!(s4.phi, ((g0 + geom.r) / geom.a).acos(), epsilon = 1e-9);

        // Rotating a circular cam does not move the world contact point.
        let s1r = wire_tangency(&prof, 0.4, &geom, WireCase::One).unwrap();
        assert_abs_diff_eq!(s1r.phi, s1.phi, epsilon = 1e-9);
        assert_abs_diff_eq!(s1r.phi_cam, s1.phi - 0.4, epsilon = 1e-9);
    }

    #[test]
    fn circular_capstan_rates() {
        let g0 = 0.1;
        let geom = test_geom();
        let prof = circle(g0);

        // Case Two pays out at +g0 per radian; case One reels in at -g0.
        let (_, rate2) = wire_length_rate(&prof, 0.1, &geom, WireCase::Two, 2.5).unwrap();
        assert_relative_eq!(rate2, g0, max_relative = 1e-9);
        let (_, rate1) = wire_length_rate(&prof, 0.1, &geom, WireCase::One, -2.5).unwrap();
        assert_relative_eq!(rate1, -g0, max_relative = 1e-9);

        // Finite differences agree.
        let h = 1e-6;
        let lp = wire_length(&prof, 0.1 + h, &geom, WireCase::Two, 2.5).unwrap();
        let lm = wire_length(&prof, 0.1 - h, &geom, WireCase::Two, 2.5).unwrap();
        assert_relative_eq!((lp - lm) / (2.0 * h), g0, max_relative = 1e-6);

        // Moving the attachment by dphi changes L by g0*dphi (arc length).
        let d = 0.2;
        let la = wire_length(&prof, 0.1, &geom, WireCase::Two, 2.5 + d).unwrap();
        let lb = wire_length(&prof, 0.1, &geom, WireCase::Two, 2.5).unwrap();
        assert_relative_eq!(la - lb, g0 * d, max_relative = 1e-9);
    }

    #[test]
    fn noncircular_rate_matches_finite_difference() {
        // Mildly eccentric profile keeps a unique tangency in the window.
        let n = 361;
        let phi: Vec<f64> = (0..n)
            .map(|j| -PI + 2.0 * PI * j as f64 / (n - 1) as f64)
            .collect();
        let g: Vec<f64> = phi.iter().map(|p| 0.1 + 0.02 * (p + 0.4).sin()).collect();
        let prof = CamProfile::from_samples(phi, g).unwrap();
        let geom = test_geom();

        for &theta in &[-0.3, 0.0, 0.25, 0.6] {
            let (_, rate) = wire_length_rate(&prof, theta, &geom, WireCase::One, -2.9).unwrap();
            let h = 1e-6;
            let lp = wire_length(&prof, theta + h, &geom, WireCase::One, -2.9).unwrap();
            let lm = wire_length(&prof, theta - h, &geom, WireCase::One, -2.9).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert_relative_eq!(rate, fd, max_relative = 1e-6);

            let (_, rate2) = wire_length_rate(&prof, theta, &geom, WireCase::Two, 2.9).unwrap();
            let lp2 = wire_length(&prof, theta + h, &geom, WireCase::Two, 2.9).unwrap();
            let lm2 = wire_length(&prof, theta - h, &geom, WireCase::Two, 2.9).unwrap();
            assert_relative_eq!(rate2, (lp2 - lm2) / (2.0 * h), max_relative = 1e-6);
        }
    }

    #[test]
    fn circular_forward_torque_law() {
        let g0 = 0.1;
        let geom = test_geom();
        let prof = circle(g0);
        let theta_ref = 0.0;
        let l_ref = wire_length(&prof, theta_ref, &geom, WireCase::Two, 2.5).unwrap();
        for &theta in &[0.0, 0.2, 0.5, 1.0] {
            let tau = cam_torque_forward(&prof, theta, &geom, WireCase::Two, 2.5, l_ref).unwrap();
            let want = geom.k * (geom.u_t + g0 * (theta - theta_ref)) * g0;
            assert_relative_eq!(tau, want, max_relative = 1e-8);
        }
    }

    #[test]
    fn forward_torque_matches_energy_gradient() {
        let n = 361;
        let phi: Vec<f64> = (0..n)
            .map(|j| -PI + 2.0 * PI * j as f64 / (n - 1) as f64)
            .collect();
        let g: Vec<f64> = phi.iter().map(|p| 0.11 + 0.015 * (1.3 * p).cos()).collect();
        let prof = CamProfile::from_samples(phi, g).unwrap();
        let geom = test_geom();
        let l_ref = wire_length(&prof, -0.2, &geom, WireCase::Two, 2.9).unwrap();
        let energy = |theta: f64| {
            let l = wire_length(&prof, theta, &geom, WireCase::Two, 2.9).unwrap();
            let u = geom.u_t + l - l_ref;
            0.5 * geom.k * u * u
        };
        for &theta in &[0.0, 0.3, 0.7] {
            let tau = cam_torque_forward(&prof, theta, &geom, WireCase::Two, 2.9, l_ref).unwrap();
            let h = 1e-6;
            let fd = (energy(theta + h) - energy(theta - h)) / (2.0 * h);
            assert_relative_eq!(tau, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn slack_wire_detected() {
        let g0 = 0.1;
        let geom = test_geom();
        let prof = circle(g0);
        let l_ref = wire_length(&prof, 0.0, &geom, WireCase::Two, 2.5).unwrap();
        // Case Two payout: L decreases when theta drops, so a big negative
        // rotation eats the pretension.
        let err = cam_torque_forward(&prof, -1.0, &geom, WireCase::Two, 2.5, l_ref).unwrap_err();
        assert!(matches!(err, CamError::SlackWire { .. }), "got {err:?}");
    }

    #[test]
    fn attachment_order_enforced() {
        let geom = test_geom();
        let prof = circle(0.1);
        // Case One needs attach <= contact.
        let err = wire_length(&prof, 0.0, &geom, WireCase::One, 2.0).unwrap_err();
        assert!(matches!(err, CamError::AttachmentPassed { .. }), "got {err:?}");
        // Case Two needs attach >= contact.
        let err = wire_length(&prof, 0.0, &geom, WireCase::Two, -2.0).unwrap_err();
        assert!(matches!(err, CamError::AttachmentPassed { .. }), "got {err:?}");
    }

    #[test]
    fn modal_fit_recovers_polynomials() {
        let alphas: Vec<f64> = (0..25).map(|j| 0.3 + 0.05 * j as f64).collect();
        let truth = ModalTorque::new(vec![0.4, -1.2, 0.9, 0.05, -0.3]);
        let torques: Vec<f64> = alphas.iter().map(|&a| truth.eval(a)).collect();
        let fit = fit_modal_torque(&alphas, &torques, 4).unwrap();
        for (c, t) in fit.coeffs.iter().zip(&truth.coeffs) {
            assert_abs_diff_eq!(c, t, epsilon = 1e-10);
        }
        // Derivative consistency.
        let (v, dv) = fit.eval_with_derivative(0.8);
        let h = 1e-6;
        assert_relative_eq!(v, truth.eval(0.8), max_relative = 1e-10);
        assert_relative_eq!(
            dv,
            (truth.eval(0.8 + h) - truth.eval(0.8 - h)) / (2.0 * h),
            max_relative = 1e-8
        );
        // Negation is the balancing target.
        let des = desired_cam_torque(&fit);
        assert_abs_diff_eq!(des.eval(0.7), -fit.eval(0.7), epsilon = 1e-12);
        // Mirror pullback: f_m(a) = -f(-a).
        let mir = fit.mirror();
        assert_abs_diff_eq!(mir.eval(0.7), -fit.eval(-0.7), epsilon = 1e-12);
    }

    #[test]
    fn modal_fit_flags_rank_deficiency() {
        let alphas = vec![0.5; 8];
        let torques = vec![1.0; 8];
        let err = fit_modal_torque(&alphas, &torques, 3).unwrap_err();
        assert!(matches!(err, CamError::RankDeficient { .. }), "got {err:?}");
    }

    #[test]
    fn synthesis_reproduces_circular_cam() {
        // The torque law of a circular cam of radius g0 in the payout
        // convention: tau = k*(u_t + g0*(alpha - alpha_lo))*g0.
        let geom = test_geom();
        let g0 = 0.1;
        let (alpha_lo, alpha_hi) = (0.6, 2.2);
        let desired = ModalTorque::new(vec![
            geom.k * (geom.u_t - g0 * alpha_lo) * g0,
            geom.k * g0 * g0,
        ]);
        let design = synthesize_cam_profile(&desired, alpha_lo, alpha_hi, &geom, 201).unwrap();
        assert!(!design.mirrored);
        assert_eq!(design.case, WireCase::Two);
        let (_, g) = design.profile.samples();
        for &v in g {
            assert_relative_eq!(v, g0, max_relative = 1e-6);
        }
        for j in 0..=20 {
            let alpha = alpha_lo + (alpha_hi - alpha_lo) * j as f64 / 20.0;
            let tau = design.torque_at(alpha).unwrap();
            assert_relative_eq!(tau, desired.eval(alpha), max_relative = 1e-5);
        }
        // Extension tracks the designed u(alpha) = u_t + g0*(alpha - alpha_lo).
        let u = design.extension_at(alpha_hi).unwrap();
        assert_relative_eq!(
            u,
            geom.u_t + g0 * (alpha_hi - alpha_lo),
            max_relative = 1e-6
        );
    }

    /// Cubic target built from arm m(a) = 0.1 + 0.02a and extension
    /// u' = m, u(0) = u_t: f = k*u*m is realizable with a gentle cam.
    fn gentle_cubic(geom: &WireCamGeometry) -> ModalTorque {
        let u_t = geom.u_t;
        ModalTorque::new(vec![
            geom.k * u_t * 0.1,
            geom.k * (u_t * 0.02 + 0.01),
            geom.k * 0.003,
            geom.k * 0.0002,
        ])
    }

    #[test]
    fn synthesis_handles_varying_torque_and_mirror() {
        // Moment arm f/(k*u) stays well inside (r, a) over this range.
        let geom = test_geom();
        let desired = gentle_cubic(&geom);
        let (alpha_lo, alpha_hi) = (0.0, 1.5);
        let design = synthesize_cam_profile(&desired, alpha_lo, alpha_hi, &geom, 301).unwrap();
        for j in 0..=24 {
            let alpha = alpha_lo + (alpha_hi - alpha_lo) * j as f64 / 24.0;
            let tau = design.torque_at(alpha).unwrap();
            assert_relative_eq!(tau, desired.eval(alpha), max_relative = 2e-3);
        }

        // The mirrored target synthesizes to the mirrored design.
        let neg = desired.mirror();
        let mdesign = synthesize_cam_profile(&neg, -alpha_hi, -alpha_lo, &geom, 301).unwrap();
        assert!(mdesign.mirrored);
        assert_eq!(mdesign.case, WireCase::One);
        let (plo, phi_) = mdesign.public_alpha_range();
        assert_abs_diff_eq!(plo, -alpha_hi, epsilon = 1e-12);
        assert_abs_diff_eq!(phi_, -alpha_lo, epsilon = 1e-12);
        for j in 0..=24 {
            let alpha = -alpha_hi + (alpha_hi - alpha_lo) * j as f64 / 24.0;
            let tau = mdesign.torque_at(alpha).unwrap();
            assert_relative_eq!(tau, neg.eval(alpha), max_relative = 2e-3);
        }
    }

    #[test]
    fn synthesis_error_paths() {
        let geom = test_geom();
        // Target crosses zero inside the range: moment arm leaves (r, a).
        let crossing = ModalTorque::new(vec![0.0, 1.0]);
        let err = synthesize_cam_profile(&crossing, -0.5, 0.5, &geom, 101).unwrap_err();
        assert!(
            matches!(
                err,
                CamError::GeometryInfeasible { .. } | CamError::InfeasibleTorque { .. }
            ),
            "got {err:?}"
        );

        // A target that dips negative early is rejected one way or another:
        // the energy integral can go negative or the arm leaves the band.
        let mut g2 = geom;
        g2.u_t = 0.01;
        g2.k = 5.0;
        let dip = ModalTorque::new(vec![0.5, 3.0]);
        let err = synthesize_cam_profile(&dip, -1.5, 0.5, &g2, 101).unwrap_err();
        assert!(
            matches!(
                err,
                CamError::InfeasibleTorque { .. } | CamError::GeometryInfeasible { .. }
            ),
            "got {err:?}"
        );

        // Out-of-range evaluation is rejected.
        let desired = gentle_cubic(&geom);
        let design = synthesize_cam_profile(&desired, 0.0, 1.5, &geom, 101).unwrap();
        let err = design.torque_at(2.5).unwrap_err();
        assert!(matches!(err, CamError::RangeExceeded { .. }), "got {err:?}");
    }

    #[test]
    fn near_zero_stiffness_cams_leave_baseline() {
        use crate::workspace::{spiral_path, TaskSpec};
        let geom = RobotGeometry::wide_default();
        let mass = MassModel::default_study();
        let task = TaskSpec {
            task_radius: 0.02,
            spiral_points: 30,
            ..TaskSpec::default()
        };
        let path = spiral_path(Vector2::new(0.01, -0.01), -0.05, &task);

        // Vanishing spring rate: cam torque ~ 1e-11 N m, so the balanced
        // torque table collapses onto the gravity baseline and e_tau -> 1.
        let wire = WireCamGeometry {
            a: 0.25,
            r: 0.04,
            k: 1e-9,
            u_t: 0.05,
            q0: 0.0,
        };
        let g0 = 0.1;
        let (lo, hi) = (-2.0, 4.9);
        // Self-consistent circular family: tau = k*g0*(u_t + g0*(alpha - lo)).
        let desired = ModalTorque::new(vec![
            wire.k * g0 * (wire.u_t - g0 * lo),
            wire.k * g0 * g0,
        ]);
        let d = synthesize_cam_profile(&desired, lo, hi, &wire, 201).unwrap();
        let designs = [d.clone(), d.clone(), d];
        let report = balance_with_cams(&path, &geom, &mass, &designs).unwrap();
        for i in 0..3 {
            assert_relative_eq!(report.e_tau[i], 1.0, max_relative = 1e-6);
        }
        assert_eq!(report.residual.len(), path.len());
        assert_eq!(report.alpha.len(), path.len());
    }
}
