//! Dexterous-workspace scanning, task-based sub-workspace erosion, the
//! spiral task path, and optimal task placement.
//!
//! The dexterous workspace is the set of platform positions reachable at
//! every orientation in the configured range. It is represented in polar
//! form about the world origin: for each azimuth sample the maximal radius
//! such that the whole ray segment is reachable at all sampled orientations.
//! The task-based sub-workspace erodes that region by the task-disk radius,
//! so a task centered at any remaining point fits entirely inside the
//! dexterous workspace.

use crate::kinematics::{LayoutTag, Pose, RobotGeometry, Vec2, Vec3};
use crate::numeric::linspace;
use crate::spring_opt::{optimize_springs, BalancingMode, PathStatics, SolverOptions};
use crate::statics::MassModel;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("dexterous workspace is empty: {0}")]
    EmptyWorkspace(String),
    #[error("invalid scan settings: {0}")]
    InvalidSettings(String),
    #[error("no placement candidate could be evaluated")]
    NoFeasiblePlacement,
}

/// Task requirements: the disk the platform must cover and the orientation
/// freedom it must keep everywhere on it.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    /// Task disk radius, m.
    pub task_radius: f64,
    /// Required orientation range +-, rad.
    pub orientation_range: f64,
    /// Number of points on the spiral path.
    pub spiral_points: usize,
    /// Number of spiral turns from center to rim.
    pub spiral_turns: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            task_radius: 0.05,
            orientation_range: 30f64.to_radians(),
            spiral_points: 1500,
            spiral_turns: 12.0,
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.task_radius >= 0.0 && self.task_radius.is_finite()) {
            return Err(format!("task_radius must be >= 0, got {}", self.task_radius));
        }
        if !(self.orientation_range > 0.0 && self.orientation_range <= PI) {
            return Err(format!(
                "orientation_range must lie in (0, pi], got {}",
                self.orientation_range
            ));
        }
        if self.spiral_points < 2 {
            return Err(format!("spiral_points must be >= 2, got {}", self.spiral_points));
        }
        if !(self.spiral_turns > 0.0) {
            return Err(format!("spiral_turns must be > 0, got {}", self.spiral_turns));
        }
        Ok(())
    }
}

/// Resolution knobs for the workspace scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    /// Azimuth step, rad.
    pub angular_resolution: f64,
    /// Orientation sweep step, rad.
    pub orientation_resolution: f64,
    /// Radial bisection tolerance, m.
    pub radial_tolerance: f64,
    /// Total azimuth span centered on 0; `None` scans the full circle.
    pub azimuth_span: Option<f64>,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            angular_resolution: 1f64.to_radians(),
            orientation_resolution: 5f64.to_radians(),
            radial_tolerance: 1e-4,
            azimuth_span: None,
        }
    }
}

impl ScanSettings {
    /// Layout-appropriate defaults: the narrow layout is only scanned over
    /// a +-120 degree sector since its workspace hugs the base line.
    pub fn for_layout(layout: LayoutTag) -> Self {
        match layout {
            LayoutTag::Wide => Self::default(),
            LayoutTag::Narrow => Self {
                azimuth_span: Some(240f64.to_radians()),
                ..Self::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.angular_resolution > 0.0 && self.angular_resolution < PI) {
            return Err("angular_resolution must lie in (0, pi)".to_string());
        }
        if !(self.orientation_resolution > 0.0) {
            return Err("orientation_resolution must be > 0".to_string());
        }
        if !(self.radial_tolerance > 0.0) {
            return Err("radial_tolerance must be > 0".to_string());
        }
        if let Some(span) = self.azimuth_span {
            if !(span > 0.0 && span <= 2.0 * PI) {
                return Err("azimuth_span must lie in (0, 2*pi]".to_string());
            }
        }
        Ok(())
    }
}

/// Polar map of the dexterous workspace (and, after erosion, the
/// sub-workspace) about the world origin.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceMap {
    /// Azimuth samples, rad. Full-circle maps cover [-pi, pi) uniformly;
    /// sector maps cover [-span/2, span/2] inclusive.
    pub azimuths: Vec<f64>,
    pub full_circle: bool,
    /// Orientation samples, rad; first and last are exactly +-range.
    pub gammas: Vec<f64>,
    /// Max reachable radius per orientation: `per_gamma[gi][ai]`.
    pub per_gamma: Vec<Vec<f64>>,
    /// Intersection over orientations: the dexterous boundary per azimuth.
    pub boundary: Vec<f64>,
    /// Radial interval of sub-workspace centers per azimuth, `None` where
    /// the task disk never fits. Before erosion this is `(0, boundary)`.
    pub sub_span: Vec<Option<(f64, f64)>>,
    /// Erosion radius the current `sub_span` was computed with.
    pub applied_task_radius: f64,
}

/// Reachability of a pose: every leg's base-to-anchor distance must lie in
/// the closed annulus [|l1-l2|, l1+l2]. Mirrors `inverse_kinematics`, which
/// fails exactly outside this set, but skips the trigonometry.
pub fn pose_reachable(pose: &Pose, geom: &RobotGeometry) -> bool {
    let rot = pose.rotation();
    let lo = (geom.l1 - geom.l2).abs();
    let hi = geom.l1 + geom.l2;
    for i in 0..3 {
        let anchor = pose.position + rot * geom.platform_anchor[i];
        let d = (anchor - geom.base[i]).norm();
        if d < lo || d > hi {
            return false;
        }
    }
    true
}

/// Largest radius along `dir` whose whole segment from the origin stays
/// reachable at orientation `gamma`: exponential growth then bisection.
/// Assumes the origin itself is reachable.
fn ray_limit(geom: &RobotGeometry, gamma: f64, dir: Vec2, tol: f64) -> f64 {
    let reach = |r: f64| pose_reachable(&Pose::from_parts(dir * r, gamma), geom);
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while reach(hi) {
        lo = hi;
        hi *= 2.0;
        debug_assert!(hi < 1e6, "unbounded workspace ray");
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if reach(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Orientation grid: multiples of the resolution, with the range endpoints
/// forced in exactly.
fn orientation_samples(range: f64, resolution: f64) -> Vec<f64> {
    let k_max = (range / resolution + 1e-9).floor() as i64;
    let mut gs: Vec<f64> = (-k_max..=k_max).map(|k| k as f64 * resolution).collect();
    let snap = |gs: &mut Vec<f64>, target: f64| {
        if let Some(v) = gs.iter_mut().min_by(|a, b| {
            (**a - target).abs().partial_cmp(&(**b - target).abs()).unwrap()
        }) {
            if (*v - target).abs() < 1e-9 {
                *v = target;
                return;
            }
        }
        gs.push(target);
    };
    snap(&mut gs, -range);
    snap(&mut gs, range);
    gs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gs
}

/// Scan the dexterous workspace: per azimuth, the largest radius reachable
/// at every sampled orientation.
pub fn scan_dexterous_workspace(
    geom: &RobotGeometry,
    task: &TaskSpec,
    settings: &ScanSettings,
) -> Result<WorkspaceMap, WorkspaceError> {
    task.validate().map_err(WorkspaceError::InvalidSettings)?;
    settings.validate().map_err(WorkspaceError::InvalidSettings)?;
    geom.validate().map_err(WorkspaceError::InvalidSettings)?;

    let gammas = orientation_samples(task.orientation_range, settings.orientation_resolution);

    // The polar representation is anchored at the origin, so the origin must
    // itself be in the dexterous workspace.
    for &g in &gammas {
        if !pose_reachable(&Pose::from_parts(Vec2::zeros(), g), geom) {
            return Err(WorkspaceError::EmptyWorkspace(format!(
                "origin unreachable at orientation {g:.4} rad"
            )));
        }
    }

    let (azimuths, full_circle) = match settings.azimuth_span {
        None => {
            let n = ((2.0 * PI / settings.angular_resolution).round() as usize).max(4);
            let step = 2.0 * PI / n as f64;
            ((0..n).map(|j| -PI + j as f64 * step).collect::<Vec<_>>(), true)
        }
        Some(span) => {
            let n = ((span / settings.angular_resolution).round() as usize).max(1) + 1;
            (linspace(-span / 2.0, span / 2.0, n), false)
        }
    };

    let per_gamma: Vec<Vec<f64>> = gammas
        .par_iter()
        .map(|&g| {
            azimuths
                .iter()
                .map(|&az| {
                    ray_limit(
                        geom,
                        g,
                        Vec2::new(az.cos(), az.sin()),
                        settings.radial_tolerance,
                    )
                })
                .collect()
        })
        .collect();

    let boundary: Vec<f64> = (0..azimuths.len())
        .map(|ai| {
            per_gamma
                .iter()
                .map(|row| row[ai])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let sub_span = boundary.iter().map(|&b| Some((0.0, b))).collect();
    Ok(WorkspaceMap {
        azimuths,
        full_circle,
        gammas,
        per_gamma,
        boundary,
        sub_span,
        applied_task_radius: 0.0,
    })
}

impl WorkspaceMap {
    /// Dexterous boundary radius at an arbitrary azimuth, linearly
    /// interpolated between scan samples; `None` outside a sector map's span.
    pub fn boundary_radius(&self, azimuth: f64) -> Option<f64> {
        let n = self.azimuths.len();
        if n == 0 {
            return None;
        }
        if self.full_circle {
            let step = 2.0 * PI / n as f64;
            let mut t = (azimuth + PI) / step;
            t = t.rem_euclid(n as f64);
            let i0 = t.floor() as usize % n;
            let i1 = (i0 + 1) % n;
            let frac = t - t.floor();
            Some(self.boundary[i0] * (1.0 - frac) + self.boundary[i1] * frac)
        } else {
            let lo = self.azimuths[0];
            let hi = self.azimuths[n - 1];
            if azimuth < lo - 1e-12 || azimuth > hi + 1e-12 {
                return None;
            }
            let step = (hi - lo) / (n - 1) as f64;
            let t = ((azimuth - lo) / step).clamp(0.0, (n - 1) as f64);
            let i0 = (t.floor() as usize).min(n - 2);
            let frac = t - i0 as f64;
            Some(self.boundary[i0] * (1.0 - frac) + self.boundary[i0 + 1] * frac)
        }
    }

    /// Membership in the scanned dexterous region.
    pub fn contains(&self, p: Vec2) -> bool {
        let r = p.norm();
        if r < 1e-15 {
            return true;
        }
        match self.boundary_radius(p.y.atan2(p.x)) {
            Some(rb) => r <= rb + 1e-12,
            None => false,
        }
    }

    /// True when the whole closed disk about `c` lies in the dexterous
    /// region, probed at the scan's angular resolution on two rings plus the
    /// center. Two rings suffice because the region is an intersection of
    /// per-leg reachability disks intersected over orientations, hence
    /// convex for the shipped geometries.
    pub fn disk_inside(&self, c: Vec2, radius: f64) -> bool {
        if radius <= 0.0 {
            return self.contains(c);
        }
        if !self.contains(c) {
            return false;
        }
        let n_probe = self.azimuths.len().max(16);
        for ring in [radius, 0.5 * radius] {
            let m = if ring == radius { n_probe } else { (n_probe / 2).max(8) };
            for k in 0..m {
                let psi = k as f64 * 2.0 * PI / m as f64;
                if !self.contains(c + ring * Vec2::new(psi.cos(), psi.sin())) {
                    return false;
                }
            }
        }
        true
    }

    /// Membership in the eroded sub-workspace (radial interval test at the
    /// nearest lower azimuth sample).
    pub fn sub_contains(&self, p: Vec2) -> bool {
        let r = p.norm();
        let az = if r < 1e-15 { 0.0 } else { p.y.atan2(p.x) };
        let n = self.azimuths.len();
        let idx = if self.full_circle {
            let step = 2.0 * PI / n as f64;
            (((az + PI) / step).rem_euclid(n as f64).round() as usize) % n
        } else {
            let lo = self.azimuths[0];
            let hi = self.azimuths[n - 1];
            if az < lo - 1e-12 || az > hi + 1e-12 {
                return false;
            }
            let step = (hi - lo) / (n - 1) as f64;
            (((az - lo) / step).round() as usize).min(n - 1)
        };
        match self.sub_span[idx] {
            Some((inner, outer)) => r >= inner - 1e-12 && r <= outer + 1e-12,
            None => false,
        }
    }
}

/// Erode the dexterous workspace by the task radius: a center stays iff the
/// whole task disk around it fits in the dexterous region.
pub fn compute_sub_workspace(
    map: &WorkspaceMap,
    task: &TaskSpec,
) -> Result<WorkspaceMap, WorkspaceError> {
    task.validate().map_err(WorkspaceError::InvalidSettings)?;
    let mut out = map.clone();
    out.applied_task_radius = task.task_radius;
    if task.task_radius == 0.0 {
        out.sub_span = map.boundary.iter().map(|&b| Some((0.0, b))).collect();
        return Ok(out);
    }
    let r_task = task.task_radius;
    let tol = 1e-5;

    out.sub_span = map
        .azimuths
        .par_iter()
        .zip(map.boundary.par_iter())
        .map(|(&az, &b)| {
            let dir = Vec2::new(az.cos(), az.sin());
            let inside = |r: f64| map.disk_inside(dir * r, r_task);
            // coarse pass to find the inside interval, then bisect its edges
            let n_coarse = 48;
            let rs: Vec<f64> = (0..=n_coarse).map(|k| b * k as f64 / n_coarse as f64).collect();
            let flags: Vec<bool> = rs.iter().map(|&r| inside(r)).collect();
            let first = flags.iter().position(|&f| f)?;
            let last = flags.iter().rposition(|&f| f)?;
            let inner = if first == 0 {
                0.0
            } else {
                // rs[first-1] outside, rs[first] inside
                let (mut lo, mut hi) = (rs[first - 1], rs[first]);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if inside(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            let outer = if last == n_coarse {
                b
            } else {
                // rs[last] inside, rs[last+1] outside
                let (mut lo, mut hi) = (rs[last], rs[last + 1]);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if inside(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            Some((inner, outer))
        })
        .collect();

    if out.sub_span.iter().all(|s| s.is_none()) {
        return Err(WorkspaceError::EmptyWorkspace(format!(
            "task disk of radius {r_task} m fits nowhere"
        )));
    }
    Ok(out)
}

/// Archimedean spiral task path: radius grows linearly with point index
/// from 0 to the task radius over `spiral_turns` revolutions, at constant
/// platform orientation.
pub fn spiral_path(center: Vec2, gamma: f64, task: &TaskSpec) -> Vec<Pose> {
    let n = task.spiral_points.max(2);
    let denom = (n - 1) as f64;
    (0..n)
        .map(|j| {
            let s = j as f64 / denom;
            let r = task.task_radius * s;
            let th = 2.0 * PI * task.spiral_turns * s;
            Pose::from_parts(center + r * Vec2::new(th.cos(), th.sin()), gamma)
        })
        .collect()
}

/// Knobs for the placement search.
#[derive(Debug, Clone)]
pub struct PlacementOptions {
    /// Evaluate every n-th scan azimuth.
    pub azimuth_stride: usize,
    /// Radial candidate count per azimuth interval.
    pub radial_samples: usize,
    /// Spiral points used during candidate evaluation (decoupled from the
    /// final path resolution for speed).
    pub eval_points: usize,
    /// Optimizer multi-starts during candidate evaluation.
    pub eval_starts: usize,
    pub seed: u64,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        Self {
            azimuth_stride: 15,
            radial_samples: 5,
            eval_points: 150,
            eval_starts: 2,
            seed: 0x3a8f_51c2,
        }
    }
}

/// One evaluated placement candidate.
#[derive(Debug, Clone)]
pub struct CandidateRecord {
    pub center: Vec2,
    pub gamma: f64,
    /// Mean unsprung torque norm over the evaluation spiral.
    pub mean_tau0: f64,
    /// Mean torque norm after Mode-1 spring optimization.
    pub mean_tau1: f64,
    /// 1 - mean_tau1 / mean_tau0.
    pub reduction: f64,
    /// Present when the candidate was skipped, with the reason.
    pub skipped: Option<String>,
}

/// A point of extremal mean required torque (reporting diagnostic).
#[derive(Debug, Clone, Copy)]
pub struct TorqueExtreme {
    pub center: Vec2,
    pub gamma: f64,
    pub mean_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Placement {
    pub center: Vec2,
    pub gamma: f64,
    pub reduction: f64,
    pub candidates: Vec<CandidateRecord>,
    pub max_torque: TorqueExtreme,
    pub min_torque: TorqueExtreme,
}

fn mean_norm(rows: &[Vec3]) -> f64 {
    rows.iter().map(|r| r.norm()).sum::<f64>() / rows.len() as f64
}

/// Pick the task placement (center and orientation) with the largest mean
/// torque-norm reduction from Mode 0 to an optimized Mode 1, over a grid of
/// sub-workspace centers crossed with candidate orientations. Candidates
/// whose evaluation fails are skipped and recorded.
pub fn optimal_task_location(
    map: &WorkspaceMap,
    geom: &RobotGeometry,
    mass: &MassModel,
    task: &TaskSpec,
    candidate_gammas: &[f64],
    opts: &PlacementOptions,
) -> Result<Placement, WorkspaceError> {
    if candidate_gammas.is_empty() {
        return Err(WorkspaceError::InvalidSettings(
            "candidate orientation set is empty".to_string(),
        ));
    }
    let stride = opts.azimuth_stride.max(1);
    let mut centers: Vec<Vec2> = Vec::new();
    let mut origin_added = false;
    for ai in (0..map.azimuths.len()).step_by(stride) {
        let Some((inner, outer)) = map.sub_span[ai] else {
            continue;
        };
        if outer - inner < 1e-9 {
            continue;
        }
        let az = map.azimuths[ai];
        let dir = Vec2::new(az.cos(), az.sin());
        let rs = if opts.radial_samples <= 1 {
            vec![0.5 * (inner + outer)]
        } else {
            linspace(inner, outer, opts.radial_samples)
        };
        for r in rs {
            if r < 1e-12 {
                if !origin_added {
                    centers.push(Vec2::zeros());
                    origin_added = true;
                }
            } else {
                centers.push(dir * r);
            }
        }
    }
    if centers.is_empty() {
        return Err(WorkspaceError::EmptyWorkspace(
            "sub-workspace has no candidate centers".to_string(),
        ));
    }

    let eval_task = TaskSpec {
        spiral_points: opts.eval_points.max(2),
        ..task.clone()
    };
    let solver = SolverOptions {
        starts: opts.eval_starts.max(1),
        max_iters: 120,
        seed: opts.seed,
        ..SolverOptions::default()
    };

    let pairs: Vec<(Vec2, f64)> = centers
        .iter()
        .flat_map(|&c| candidate_gammas.iter().map(move |&g| (c, g)))
        .collect();

    let candidates: Vec<CandidateRecord> = pairs
        .par_iter()
        .map(|&(center, gamma)| {
            let path = spiral_path(center, gamma, &eval_task);
            let stats = match PathStatics::compute(&path, geom, mass) {
                Ok(s) => s,
                Err(e) => {
                    return CandidateRecord {
                        center,
                        gamma,
                        mean_tau0: f64::NAN,
                        mean_tau1: f64::NAN,
                        reduction: f64::NEG_INFINITY,
                        skipped: Some(e.to_string()),
                    }
                }
            };
            let mean0 = mean_norm(&stats.tau_g);
            if mean0 < 1e-12 {
                return CandidateRecord {
                    center,
                    gamma,
                    mean_tau0: mean0,
                    mean_tau1: mean0,
                    reduction: 0.0,
                    skipped: None,
                };
            }
            match optimize_springs(&stats, BalancingMode::Mode1, None, &solver) {
                Ok(res) => {
                    let mean1 = mean_norm(&res.torque_table);
                    CandidateRecord {
                        center,
                        gamma,
                        mean_tau0: mean0,
                        mean_tau1: mean1,
                        reduction: 1.0 - mean1 / mean0,
                        skipped: None,
                    }
                }
                Err(e) => CandidateRecord {
                    center,
                    gamma,
                    mean_tau0: mean0,
                    mean_tau1: f64::NAN,
                    reduction: f64::NEG_INFINITY,
                    skipped: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut best: Option<&CandidateRecord> = None;
    let mut hi: Option<&CandidateRecord> = None;
    let mut lo: Option<&CandidateRecord> = None;
    for rec in &candidates {
        if rec.skipped.is_some() {
            continue;
        }
        if best.map_or(true, |b| rec.reduction > b.reduction) {
            best = Some(rec);
        }
        if hi.map_or(true, |b| rec.mean_tau0 > b.mean_tau0) {
            hi = Some(rec);
        }
        if lo.map_or(true, |b| rec.mean_tau0 < b.mean_tau0) {
            lo = Some(rec);
        }
    }
    let best = best.ok_or(WorkspaceError::NoFeasiblePlacement)?;
    let to_extreme = |r: &CandidateRecord| TorqueExtreme {
        center: r.center,
        gamma: r.gamma,
        mean_norm: r.mean_tau0,
    };
    Ok(Placement {
        center: best.center,
        gamma: best.gamma,
        reduction: best.reduction,
        max_torque: to_extreme(hi.unwrap()),
        min_torque: to_extreme(lo.unwrap()),
        candidates: candidates.clone(),
    })
}
