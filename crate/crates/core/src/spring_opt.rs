//! Torsional-spring balancing: nonlinear least-squares fitting of spring
//! constants and free angles so the actuator torque along a task path is as
//! close to zero as possible, plus the e_tau performance measure.
//!
//! Three equipping modes are supported: springs at the active joints only
//! (Mode 1), at the elbow joints only (Mode 2), or at both (Mode 3). Mode 0
//! is the unsprung baseline. The cost is the average squared torque norm
//! over the path, M = (1/2N) sum_j |tau_j|^2, minimized over the packed
//! parameter vector with a damped least-squares (Levenberg-Marquardt) loop
//! and deterministic multi-start.

use crate::kinematics::{
    inverse_kinematics, jacobians, ElbowBranch, KinematicsError, Mat3, Pose, RobotGeometry, Vec3,
};
use crate::numeric::wrap_angle;
use crate::statics::{gravity_torque, MassModel, SpringSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Baseline torques smaller than this are excluded from e_tau ratios.
pub const EPS_GUARD: f64 = 1e-9;

/// Default box bound on spring stiffness, N*m/rad.
pub const DEFAULT_K_MAX: f64 = 100.0;

#[derive(Debug, Error)]
pub enum SpringOptError {
    #[error("path point {index}: {source}")]
    Path {
        index: usize,
        source: KinematicsError,
    },
    #[error("invalid initial guess: {0}")]
    BoundsViolation(String),
    #[error("mode 0 has no parameters to optimize")]
    NothingToOptimize,
    #[error("torque tables have different lengths ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("every baseline torque entry is below the {EPS_GUARD} N*m guard")]
    AllGuarded,
    #[error("path is empty")]
    EmptyPath,
}

/// Which joints carry balancing springs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalancingMode {
    Mode0,
    Mode1,
    Mode2,
    Mode3,
}

impl BalancingMode {
    /// Length of the packed parameter vector (stiffness + free angle per
    /// equipped joint).
    pub fn param_len(self) -> usize {
        match self {
            BalancingMode::Mode0 => 0,
            BalancingMode::Mode1 | BalancingMode::Mode2 => 6,
            BalancingMode::Mode3 => 12,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BalancingMode::Mode0 => "mode0",
            BalancingMode::Mode1 => "mode1",
            BalancingMode::Mode2 => "mode2",
            BalancingMode::Mode3 => "mode3",
        }
    }
}

/// Per-pose quantities that do not depend on the spring parameters. Caching
/// them makes each optimizer iteration pure algebra.
#[derive(Debug, Clone)]
pub struct PathStatics {
    pub poses: Vec<Pose>,
    pub q: Vec<Vec3>,
    pub phi: Vec<Vec3>,
    pub tau_g: Vec<Vec3>,
    pub j_phiq: Vec<Mat3>,
}

impl PathStatics {
    pub fn compute(
        path: &[Pose],
        geom: &RobotGeometry,
        mass: &MassModel,
    ) -> Result<Self, SpringOptError> {
        if path.is_empty() {
            return Err(SpringOptError::EmptyPath);
        }
        let n = path.len();
        let mut q = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        let mut tau_g = Vec::with_capacity(n);
        let mut j_phiq = Vec::with_capacity(n);
        for (index, pose) in path.iter().enumerate() {
            let joints = inverse_kinematics(pose, geom, ElbowBranch::Up)
                .map_err(|source| SpringOptError::Path { index, source })?;
            let jac = jacobians(pose, &joints, geom)
                .map_err(|source| SpringOptError::Path { index, source })?;
            q.push(Vec3::from(joints.q));
            phi.push(Vec3::from(joints.phi));
            tau_g.push(gravity_torque(&joints, &jac, geom, mass));
            j_phiq.push(jac.j_phiq);
        }
        Ok(Self {
            poses: path.to_vec(),
            q,
            phi,
            tau_g,
            j_phiq,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Actuator torque at path point `j` for the given springs (zero wrench).
    pub fn torque(&self, j: usize, springs: &SpringSet) -> Vec3 {
        let mut tau = self.tau_g[j];
        let mut elbow = Vec3::zeros();
        for i in 0..3 {
            tau[i] += springs.k_q[i] * wrap_angle(self.q[j][i] - springs.q_free[i]);
            elbow[i] = springs.k_phi[i] * wrap_angle(self.phi[j][i] - springs.phi_free[i]);
        }
        tau + self.j_phiq[j].transpose() * elbow
    }

    /// Full torque table for the given springs.
    pub fn torque_table(&self, springs: &SpringSet) -> Vec<Vec3> {
        (0..self.len()).map(|j| self.torque(j, springs)).collect()
    }

    /// Cost M = (1/2N) sum_j |tau_j|^2.
    pub fn cost(&self, springs: &SpringSet) -> f64 {
        let n = self.len() as f64;
        (0..self.len())
            .map(|j| self.torque(j, springs).norm_squared())
            .sum::<f64>()
            / (2.0 * n)
    }
}

/// Required actuator torque at every path point (zero external wrench).
pub fn torque_samples(
    path: &[Pose],
    geom: &RobotGeometry,
    mass: &MassModel,
    springs: &SpringSet,
) -> Result<Vec<Vec3>, SpringOptError> {
    let stats = PathStatics::compute(path, geom, mass)?;
    Ok(stats.torque_table(springs))
}

/// RMS torque ratio per leg: e_tau_i = sqrt(mean_j (mode_ij / base_ij)^2),
/// skipping path points whose baseline torque is below `EPS_GUARD` (the
/// ratio is undefined there). A leg whose baseline is guarded everywhere
/// reports 0; if all entries of all legs are guarded the measure is
/// undefined and an error is returned.
pub fn e_tau(mode_table: &[Vec3], baseline_table: &[Vec3]) -> Result<[f64; 3], SpringOptError> {
    if mode_table.len() != baseline_table.len() {
        return Err(SpringOptError::ShapeMismatch(
            mode_table.len(),
            baseline_table.len(),
        ));
    }
    let mut out = [0.0; 3];
    let mut any_kept = false;
    for i in 0..3 {
        let mut sum = 0.0;
        let mut kept = 0usize;
        for (m, b) in mode_table.iter().zip(baseline_table) {
            if b[i].abs() < EPS_GUARD {
                continue;
            }
            let ratio = m[i] / b[i];
            sum += ratio * ratio;
            kept += 1;
        }
        if kept > 0 {
            any_kept = true;
            out[i] = (sum / kept as f64).sqrt();
        }
    }
    if !any_kept {
        return Err(SpringOptError::AllGuarded);
    }
    Ok(out)
}

/// Solver knobs shared by all modes.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub starts: usize,
    pub seed: u64,
    pub k_max: f64,
    /// Use a finite-difference residual Jacobian instead of the analytic one.
    pub fd_jacobian: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-10,
            step_tol: 1e-12,
            starts: 8,
            seed: 0x3a8f_51c2,
            k_max: DEFAULT_K_MAX,
            fd_jacobian: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientSmall,
    StepSmall,
    MaxIterations,
    DampingOverflow,
}

/// Outcome of one damped least-squares run.
#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: DVector<f64>,
    pub cost: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub init_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-10,
            step_tol: 1e-12,
            init_lambda: 1e-3,
        }
    }
}

/// Box-constrained Levenberg-Marquardt for small dense problems: minimizes
/// 0.5 |r(x)|^2 with steps from (J^T J + lambda diag(J^T J)) d = -J^T r,
/// projecting iterates onto [lower, upper]. When `jacobian` is `None` the
/// Jacobian is built by central differences of `residual`.
pub fn lm_minimize<R, J>(
    x0: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    residual: R,
    jacobian: Option<J>,
    opts: &LmOptions,
) -> LmOutcome
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let n = x0.len();
    let clamp = |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |i, _| x[i].clamp(lower[i], upper[i]))
    };
    let fd_jacobian = |x: &DVector<f64>| -> DMatrix<f64> {
        let r0 = residual(x);
        let m = r0.len();
        let mut jac = DMatrix::zeros(m, n);
        for c in 0..n {
            let h = 1e-7 * (1.0 + x[c].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let rp = residual(&xp);
            let rm = residual(&xm);
            for row in 0..m {
                jac[(row, c)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        jac
    };

    let mut x = clamp(x0);
    let mut r = residual(&x);
    let mut cost = 0.5 * r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = opts.init_lambda;
    let mut reason = StopReason::MaxIterations;
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        iterations += 1;
        let jac = match &jacobian {
            Some(f) => f(&x),
            None => fd_jacobian(&x),
        };
        let grad = jac.transpose() * &r;
        if grad.amax() < opts.grad_tol {
            reason = StopReason::GradientSmall;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        loop {
            let mut h = jtj.clone();
            for i in 0..n {
                h[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            if let Some(chol) = h.cholesky() {
                let delta = chol.solve(&(-&grad));
                let x_new = clamp(&(&x + &delta));
                let step = (&x_new - &x).norm();
                if step < opts.step_tol * (x.norm() + opts.step_tol) {
                    reason = StopReason::StepSmall;
                    break;
                }
                let r_new = residual(&x_new);
                let cost_new = 0.5 * r_new.norm_squared();
                if cost_new < cost {
                    x = x_new;
                    r = r_new;
                    cost = cost_new;
                    history.push(cost);
                    lambda = (lambda / 10.0).max(1e-14);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                reason = StopReason::DampingOverflow;
                break;
            }
        }
        if !accepted {
            break;
        }
    }

    LmOutcome {
        x,
        cost,
        history,
        iterations,
        reason,
    }
}

/// Result of a spring optimization run.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub mode: BalancingMode,
    pub springs: SpringSet,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Accepted-cost history of the winning start.
    pub cost_history: Vec<f64>,
    /// Per-leg RMS torque ratio vs the unsprung baseline on the same path;
    /// `None` when the baseline is guarded everywhere (already balanced).
    pub e_tau: Option<[f64; 3]>,
    /// Torque table at the returned springs (the augmented torque record).
    pub torque_table: Vec<Vec3>,
    /// False when no start improved on the initial guess (which is then
    /// returned unchanged).
    pub improved: bool,
    pub winning_start: usize,
}

fn pack(mode: BalancingMode, s: &SpringSet) -> DVector<f64> {
    match mode {
        BalancingMode::Mode0 => DVector::zeros(0),
        BalancingMode::Mode1 => DVector::from_iterator(6, s.k_q.into_iter().chain(s.q_free)),
        BalancingMode::Mode2 => DVector::from_iterator(6, s.k_phi.into_iter().chain(s.phi_free)),
        BalancingMode::Mode3 => DVector::from_iterator(
            12,
            s.k_q
                .into_iter()
                .chain(s.q_free)
                .chain(s.k_phi)
                .chain(s.phi_free),
        ),
    }
}

fn unpack(mode: BalancingMode, p: &DVector<f64>) -> SpringSet {
    let mut s = SpringSet::zero();
    let take3 = |off: usize| [p[off], p[off + 1], p[off + 2]];
    match mode {
        BalancingMode::Mode0 => {}
        BalancingMode::Mode1 => {
            s.k_q = take3(0);
            s.q_free = take3(3);
        }
        BalancingMode::Mode2 => {
            s.k_phi = take3(0);
            s.phi_free = take3(3);
        }
        BalancingMode::Mode3 => {
            s.k_q = take3(0);
            s.q_free = take3(3);
            s.k_phi = take3(6);
            s.phi_free = take3(9);
        }
    }
    s
}

fn bounds(mode: BalancingMode, k_max: f64) -> (DVector<f64>, DVector<f64>) {
    use std::f64::consts::PI;
    let n = mode.param_len();
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::zeros(n);
    // offsets of (stiffness triple, free-angle triple) blocks
    let groups: &[usize] = match mode {
        BalancingMode::Mode0 => &[],
        BalancingMode::Mode1 | BalancingMode::Mode2 => &[0],
        BalancingMode::Mode3 => &[0, 6],
    };
    for &off in groups {
        for i in 0..3 {
            lo[off + i] = 0.0;
            hi[off + i] = k_max;
            lo[off + 3 + i] = -PI;
            hi[off + 3 + i] = PI;
        }
    }
    (lo, hi)
}

/// Residual vector tau_breve / sqrt(N): rows 3j..3j+3 hold the torque at
/// path point j. Cost 0.5 |r|^2 equals M = (1/2N) sum |tau_j|^2.
fn residual_vector(stats: &PathStatics, mode: BalancingMode, p: &DVector<f64>) -> DVector<f64> {
    let springs = unpack(mode, p);
    let n = stats.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut r = DVector::zeros(3 * n);
    for j in 0..n {
        let tau = stats.torque(j, &springs);
        for i in 0..3 {
            r[3 * j + i] = tau[i] * scale;
        }
    }
    r
}

/// Analytic Jacobian of the residual. For stiffness k the column holds the
/// wrapped deflection (times the elbow reflection for phi springs); for a
/// free angle it is -k times the same direction.
fn residual_jacobian(stats: &PathStatics, mode: BalancingMode, p: &DVector<f64>) -> DMatrix<f64> {
    let springs = unpack(mode, p);
    let n = stats.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut jac = DMatrix::zeros(3 * n, mode.param_len());
    let q_block: Option<usize> = match mode {
        BalancingMode::Mode1 | BalancingMode::Mode3 => Some(0),
        _ => None,
    };
    let phi_block: Option<usize> = match mode {
        BalancingMode::Mode2 => Some(0),
        BalancingMode::Mode3 => Some(6),
        _ => None,
    };
    for j in 0..n {
        if let Some(off) = q_block {
            for i in 0..3 {
                let defl = wrap_angle(stats.q[j][i] - springs.q_free[i]);
                // tau_i depends only on leg i's active-joint spring
                jac[(3 * j + i, off + i)] = defl * scale;
                jac[(3 * j + i, off + 3 + i)] = -springs.k_q[i] * scale;
            }
        }
        if let Some(off) = phi_block {
            let jt = stats.j_phiq[j].transpose();
            for i in 0..3 {
                let defl = wrap_angle(stats.phi[j][i] - springs.phi_free[i]);
                let dir = jt.column(i);
                for row in 0..3 {
                    jac[(3 * j + row, off + i)] += dir[row] * defl * scale;
                    jac[(3 * j + row, off + 3 + i)] += -dir[row] * springs.k_phi[i] * scale;
                }
            }
        }
    }
    jac
}

fn random_start(mode: BalancingMode, rng: &mut ChaCha8Rng, k_max: f64) -> DVector<f64> {
    use std::f64::consts::PI;
    let n = mode.param_len();
    let mut p = DVector::zeros(n);
    let blocks: &[usize] = match mode {
        BalancingMode::Mode0 => &[],
        BalancingMode::Mode1 | BalancingMode::Mode2 => &[0],
        BalancingMode::Mode3 => &[0, 6],
    };
    for &off in blocks {
        for i in 0..3 {
            // log-uniform stiffness so starts cover both soft and stiff regimes
            let exp = rng.gen_range(-2.0..k_max.log10());
            p[off + i] = 10f64.powf(exp);
            p[off + 3 + i] = rng.gen_range(-PI..PI);
        }
    }
    p
}

/// Optimize spring parameters for `mode` over the path. `init` defaults to
/// unsprung (all zeros); it is always used as the first start, with
/// `opts.starts - 1` further seeded random starts. The best final cost wins,
/// ties broken by start index.
pub fn optimize_springs(
    stats: &PathStatics,
    mode: BalancingMode,
    init: Option<&SpringSet>,
    opts: &SolverOptions,
) -> Result<OptimizationResult, SpringOptError> {
    if mode == BalancingMode::Mode0 {
        return Err(SpringOptError::NothingToOptimize);
    }
    let mut init_springs = init.copied().unwrap_or_else(SpringSet::zero);
    for k in init_springs.k_q.iter().chain(init_springs.k_phi.iter()) {
        if !(*k >= 0.0 && *k <= opts.k_max) {
            return Err(SpringOptError::BoundsViolation(format!(
                "stiffness {k} outside [0, {}]",
                opts.k_max
            )));
        }
    }
    for a in init_springs
        .q_free
        .iter_mut()
        .chain(init_springs.phi_free.iter_mut())
    {
        if !a.is_finite() {
            return Err(SpringOptError::BoundsViolation(
                "free angle is not finite".to_string(),
            ));
        }
        *a = wrap_angle(*a);
    }

    let (lower, upper) = bounds(mode, opts.k_max);
    let lm_opts = LmOptions {
        max_iters: opts.max_iters,
        grad_tol: opts.grad_tol,
        step_tol: opts.step_tol,
        ..LmOptions::default()
    };
    let residual = |p: &DVector<f64>| residual_vector(stats, mode, p);
    let analytic = |p: &DVector<f64>| residual_jacobian(stats, mode, p);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(usize, LmOutcome)> = None;
    for start in 0..opts.starts.max(1) {
        let x0 = if start == 0 {
            pack(mode, &init_springs)
        } else {
            random_start(mode, &mut rng, opts.k_max)
        };
        let outcome = if opts.fd_jacobian {
            lm_minimize(
                &x0,
                &lower,
                &upper,
                residual,
                None::<fn(&DVector<f64>) -> DMatrix<f64>>,
                &lm_opts,
            )
        } else {
            lm_minimize(&x0, &lower, &upper, residual, Some(analytic), &lm_opts)
        };
        let better = match &best {
            None => true,
            Some((_, b)) => outcome.cost < b.cost,
        };
        if better {
            best = Some((start, outcome));
        }
    }
    let (winning_start, outcome) = best.expect("at least one start");

    let init_cost = stats.cost(&init_springs);
    let improved = outcome.cost < init_cost;
    let (springs, final_cost, cost_history) = if improved {
        (unpack(mode, &outcome.x), outcome.cost, outcome.history)
    } else {
        (init_springs, init_cost, vec![init_cost])
    };

    let baseline = stats.torque_table(&SpringSet::zero());
    let torque_table = stats.torque_table(&springs);
    let e = match e_tau(&torque_table, &baseline) {
        Ok(v) => Some(v),
        Err(SpringOptError::AllGuarded) => None,
        Err(other) => return Err(other),
    };

    Ok(OptimizationResult {
        mode,
        springs,
        initial_cost: init_cost,
        final_cost,
        cost_history,
        e_tau: e,
        torque_table,
        improved,
        winning_start,
    })
}
