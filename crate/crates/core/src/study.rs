//! Study orchestration: workspace scan, task placement, spring and cam
//! balancing, performance tables, and report assembly.
//!
//! `run_study` executes the full pipeline for one configuration and returns a
//! `ReportBundle` whose CSV artifacts are a pure function of the config (and
//! therefore byte-identical across repeat runs); timings appear only in the
//! manifest. `run_study_stage` stops the pipeline early for the partial CLI
//! verbs.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{CamConfig, StudyConfig};
use crate::kinematics::{LayoutTag, Pose, Vec2, Vec3};
use crate::report::{contour_svg, format_g3, Artifact, ReportBundle, ReportError, Table};
use crate::spring_opt::{
    e_tau, optimize_springs, BalancingMode, OptimizationResult, PathStatics, SolverOptions,
    SpringOptError,
};
use crate::statics::SpringSet;
use crate::wirecam::{
    balance_with_cams, cam_angle, desired_cam_torque, fit_modal_torque, synthesize_cam_profile,
    CamBalanceReport, CamError, ModalTorque, WireCamDesign, WireCamGeometry, WireCase,
};
use crate::workspace::{
    compute_sub_workspace, optimal_task_location, scan_dexterous_workspace, spiral_path,
    CandidateRecord, Placement, TaskSpec, WorkspaceError, WorkspaceMap,
};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Spring(#[from] SpringOptError),
    #[error(transparent)]
    Cam(#[from] CamError),
    #[error("cam design for leg {leg}: {source}")]
    CamLeg {
        leg: usize,
        #[source]
        source: CamError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("study: {0}")]
    Invalid(String),
}

/// How far the pipeline runs. Stages are cumulative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Workspace,
    Place,
    Optimize,
    Cam,
    Full,
}

/// Cam designs for all three legs plus their path evaluation.
#[derive(Debug, Clone)]
pub struct CamStudy {
    pub designs: [WireCamDesign; 3],
    /// Per-leg polynomial fit of the gravity torque vs cam angle.
    pub fits: [ModalTorque; 3],
    /// Fit order actually used per leg; lower than configured when the
    /// synthesizability fallback engaged.
    pub fit_orders: [usize; 3],
    pub report: CamBalanceReport,
}

/// Everything a study run produced, stage permitting.
#[derive(Debug)]
pub struct StudyOutcome {
    pub bundle: ReportBundle,
    pub map: WorkspaceMap,
    pub center: Option<Vec2>,
    pub gamma: Option<f64>,
    pub placement: Option<Placement>,
    pub modes: Vec<OptimizationResult>,
    pub cams: Option<CamStudy>,
    pub summary: String,
}

fn mean_norm(rows: &[Vec3]) -> f64 {
    rows.iter().map(|r| r.norm()).sum::<f64>() / rows.len().max(1) as f64
}

fn fmt3(v: [f64; 3]) -> String {
    format!("[{}, {}, {}]", format_g3(v[0]), format_g3(v[1]), format_g3(v[2]))
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome, StudyError> {
    run_study_stage(cfg, Stage::Full)
}

pub fn run_study_stage(cfg: &StudyConfig, stage: Stage) -> Result<StudyOutcome, StudyError> {
    let t0 = Instant::now();
    let mut artifacts: Vec<(String, Artifact)> = Vec::new();
    let mut summary = String::new();

    // Workspace scan and task-disk erosion.
    let scanned = scan_dexterous_workspace(&cfg.geometry, &cfg.task, &cfg.scan)?;
    let map = compute_sub_workspace(&scanned, &cfg.task)?;
    artifacts.push(("boundary.csv".into(), Artifact::Csv(boundary_table(&map))));
    artifacts.push((
        "sub_boundary.csv".into(),
        Artifact::Csv(sub_boundary_table(&map)),
    ));
    let layout_name = match cfg.geometry.layout {
        LayoutTag::Wide => "wide",
        LayoutTag::Narrow => "narrow",
    };
    summary.push_str(&format!("study {} ({} layout)\n", cfg.label, layout_name));
    summary.push_str(&format!("config sha256: {}\n", cfg.sha256));
    let max_boundary = map.boundary.iter().cloned().fold(0.0f64, f64::max);
    summary.push_str(&format!(
        "workspace: {} azimuths x {} orientations, max dexterous radius {} m\n",
        map.azimuths.len(),
        map.gammas.len(),
        format_g3(max_boundary)
    ));

    let mut outcome = StudyOutcome {
        bundle: ReportBundle {
            label: cfg.label.clone(),
            config_sha256: cfg.sha256.clone(),
            threads: rayon::current_num_threads(),
            elapsed_seconds: 0.0,
            artifacts: Vec::new(),
        },
        map,
        center: None,
        gamma: None,
        placement: None,
        modes: Vec::new(),
        cams: None,
        summary: String::new(),
    };
    if stage < Stage::Place {
        return Ok(finish(outcome, artifacts, summary, t0));
    }

    // Task placement: search, or honor pinned values.
    let (center, gamma, placement, placement_table, screen_note) =
        choose_placement(cfg, &outcome.map)?;
    artifacts.push(("placement.csv".into(), Artifact::Csv(placement_table)));
    summary.push_str(&format!(
        "placement: center = ({}, {}) m, gamma = {} rad",
        format_g3(center.x),
        format_g3(center.y),
        format_g3(gamma)
    ));
    if let Some(p) = &placement {
        summary.push_str(&format!(
            ", mode1 torque reduction = {}",
            format_g3(p.reduction)
        ));
    }
    summary.push('\n');
    if !outcome.map.sub_contains(center) {
        summary.push_str("note: task center lies outside the eroded sub-workspace\n");
    }
    if let Some(note) = screen_note {
        summary.push_str(&note);
    }
    outcome.center = Some(center);
    outcome.gamma = Some(gamma);
    outcome.placement = placement;
    if stage < Stage::Optimize {
        return Ok(finish(outcome, artifacts, summary, t0));
    }

    // Final task path and its gravity statics.
    let path = spiral_path(center, gamma, &cfg.task);
    let stats = PathStatics::compute(&path, &cfg.geometry, &cfg.mass)?;
    artifacts.push(("path.csv".into(), Artifact::Csv(path_table(&path))));
    let baseline = stats.tau_g.clone();
    artifacts.push((
        "torque_mode0.csv".into(),
        Artifact::Csv(torque_table(&path, &baseline)),
    ));
    summary.push_str(&format!(
        "mode0: mean |tau| = {} N m over {} poses\n",
        format_g3(mean_norm(&baseline)),
        path.len()
    ));

    // Spring optimization per requested mode; Mode 3 starts from Mode 1.
    let mut e_rows: Vec<Vec<f64>> = Vec::new();
    let e0 = match e_tau(&baseline, &baseline) {
        Ok(v) => v,
        Err(SpringOptError::AllGuarded) => [f64::NAN; 3],
        Err(other) => return Err(other.into()),
    };
    e_rows.push(vec![0.0, e0[0], e0[1], e0[2], (e0[0] + e0[1] + e0[2]) / 3.0]);
    let mut springs_table = Table::new(vec![
        "mode", "k_q_1", "k_q_2", "k_q_3", "q_free_1", "q_free_2", "q_free_3", "k_phi_1",
        "k_phi_2", "k_phi_3", "phi_free_1", "phi_free_2", "phi_free_3", "cost_initial",
        "cost_final",
    ]);
    let mut mode1_springs: Option<SpringSet> = None;
    for &mode in &cfg.modes {
        let init = if mode == BalancingMode::Mode3 {
            mode1_springs.as_ref()
        } else {
            None
        };
        let res = optimize_springs(&stats, mode, init, &cfg.solver)?;
        let code = match mode {
            BalancingMode::Mode0 => 0.0,
            BalancingMode::Mode1 => 1.0,
            BalancingMode::Mode2 => 2.0,
            BalancingMode::Mode3 => 3.0,
        };
        let e = res.e_tau.unwrap_or([f64::NAN; 3]);
        e_rows.push(vec![code, e[0], e[1], e[2], (e[0] + e[1] + e[2]) / 3.0]);
        let s = &res.springs;
        springs_table.push_row(vec![
            code, s.k_q[0], s.k_q[1], s.k_q[2], s.q_free[0], s.q_free[1], s.q_free[2],
            s.k_phi[0], s.k_phi[1], s.k_phi[2], s.phi_free[0], s.phi_free[1], s.phi_free[2],
            res.initial_cost, res.final_cost,
        ]);
        artifacts.push((
            format!("torque_{}.csv", mode.label()),
            Artifact::Csv(torque_table(&path, &res.torque_table)),
        ));
        summary.push_str(&format!(
            "{}: e_tau = {} (mean {}), mean |tau| = {} N m\n",
            mode.label(),
            fmt3(e),
            format_g3((e[0] + e[1] + e[2]) / 3.0),
            format_g3(mean_norm(&res.torque_table))
        ));
        if mode == BalancingMode::Mode1 {
            mode1_springs = Some(res.springs);
        }
        outcome.modes.push(res);
    }
    artifacts.push(("springs.csv".into(), Artifact::Csv(springs_table)));

    // Cam design per leg.
    if stage >= Stage::Cam && cfg.cam.enabled {
        let cams = design_cams(cfg, &stats)?;
        let e = cams.report.e_tau;
        e_rows.push(vec![4.0, e[0], e[1], e[2], (e[0] + e[1] + e[2]) / 3.0]);
        artifacts.push((
            "torque_cam.csv".into(),
            Artifact::Csv(torque_table(&path, &cams.report.residual)),
        ));
        artifacts.push(("cams.csv".into(), Artifact::Csv(cams_table(&cams))));
        for (i, design) in cams.designs.iter().enumerate() {
            let (profile, outline) = cam_shape_tables(design);
            artifacts.push((format!("cam_profile_leg{}.csv", i + 1), Artifact::Csv(profile)));
            artifacts.push((format!("cam_outline_leg{}.csv", i + 1), Artifact::Csv(outline)));
        }
        summary.push_str(&format!(
            "cams: e_tau = {} (mean {})\n",
            fmt3(e),
            format_g3((e[0] + e[1] + e[2]) / 3.0)
        ));
        for (i, d) in cams.designs.iter().enumerate() {
            let (lo, hi) = d.public_alpha_range();
            summary.push_str(&format!(
                "  leg {}: case {}, fit order {}, k = {} N/m, u_t = {} m, q0 = {} rad, \
                 alpha in [{}, {}]\n",
                i + 1,
                d.case.index(),
                cams.fit_orders[i],
                format_g3(d.geom.k),
                format_g3(d.geom.u_t),
                format_g3(d.geom.q0),
                format_g3(lo),
                format_g3(hi)
            ));
        }
        outcome.cams = Some(cams);
    }

    let mut e_table = Table::new(vec!["design", "e_tau_1", "e_tau_2", "e_tau_3", "e_tau_mean"]);
    for row in e_rows {
        e_table.push_row(row);
    }
    artifacts.push(("e_tau.csv".into(), Artifact::Csv(e_table)));
    if stage < Stage::Full {
        return Ok(finish(outcome, artifacts, summary, t0));
    }

    // Torque-ratio contour over the sub-workspace at the chosen orientation,
    // evaluated with the springs fixed at the first optimized mode's result.
    let contour_springs = outcome
        .modes
        .iter()
        .find(|r| r.mode == BalancingMode::Mode1)
        .or_else(|| outcome.modes.first())
        .map(|r| r.springs)
        .unwrap_or_else(SpringSet::zero);
    let rows = contour_rows(cfg, &outcome.map, gamma, &contour_springs);
    summary.push_str(&format!("contour: {} evaluated centers\n", rows.len()));
    let mut contour_table = Table::new(vec!["x", "y", "ratio"]);
    for r in &rows {
        contour_table.push_row(r.to_vec());
    }
    artifacts.push(("contour.csv".into(), Artifact::Csv(contour_table)));
    if cfg.output.svg {
        artifacts.push(("contour.svg".into(), Artifact::Svg(contour_svg(&rows))));
    }

    Ok(finish(outcome, artifacts, summary, t0))
}

fn finish(
    mut outcome: StudyOutcome,
    mut artifacts: Vec<(String, Artifact)>,
    summary: String,
    t0: Instant,
) -> StudyOutcome {
    artifacts.push(("summary.txt".into(), Artifact::Text(summary.clone())));
    outcome.bundle.artifacts = artifacts;
    outcome.bundle.elapsed_seconds = t0.elapsed().as_secs_f64();
    outcome.summary = summary;
    outcome
}

/// Evaluate one placement candidate: mean gravity torque on a coarse spiral
/// and the mean after a quick Mode-1 optimization. Failures are recorded as
/// skipped candidates rather than errors.
fn evaluate_candidate(cfg: &StudyConfig, center: Vec2, gamma: f64) -> CandidateRecord {
    let eval_task = TaskSpec {
        spiral_points: cfg.placement.eval_points.max(2),
        ..cfg.task.clone()
    };
    let solver = SolverOptions {
        starts: cfg.placement.eval_starts.max(1),
        max_iters: 120,
        seed: cfg.placement.seed,
        ..SolverOptions::default()
    };
    let path = spiral_path(center, gamma, &eval_task);
    let stats = match PathStatics::compute(&path, &cfg.geometry, &cfg.mass) {
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
}

fn candidates_table(records: &[CandidateRecord]) -> Table {
    let mut t = Table::new(vec![
        "x", "y", "gamma", "mean_tau0", "mean_tau1", "reduction", "skipped",
    ]);
    for r in records {
        t.push_row(vec![
            r.center.x,
            r.center.y,
            r.gamma,
            r.mean_tau0,
            r.mean_tau1,
            r.reduction,
            if r.skipped.is_some() { 1.0 } else { 0.0 },
        ]);
    }
    t
}

type Chosen = (Vec2, f64, Option<Placement>, Table, Option<String>);

/// Minimum per-leg |tau| along the path, as a fraction of the per-leg max,
/// for a placement to be considered cam-friendly. A wrapped wire can only
/// pull, so a leg torque that crosses zero has no feasible cam, and near
/// zero the torque-ratio error measure degenerates.
const CAM_SCREEN_RATIO: f64 = 0.05;

fn cam_screen_ok(cfg: &StudyConfig, center: Vec2, gamma: f64) -> bool {
    let eval_task = TaskSpec {
        spiral_points: cfg.placement.eval_points.max(2),
        ..cfg.task.clone()
    };
    let path = spiral_path(center, gamma, &eval_task);
    let Ok(stats) = PathStatics::compute(&path, &cfg.geometry, &cfg.mass) else {
        return false;
    };
    // Cheap reject first: a wrapped wire only pulls, so a leg torque that
    // crosses or approaches zero has no cam at any constants.
    let ratio_ok = (0..3).all(|leg| {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for row in &stats.tau_g {
            let v = row[leg].abs();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi > 0.0 && lo >= CAM_SCREEN_RATIO * hi
    });
    if !ratio_ok {
        return false;
    }
    // Then require an actual per-leg design plan on the evaluation path.
    let n = stats.len();
    (0..3).all(|leg| {
        let q0 = match cfg.cam.q0 {
            Some(v) => v[leg],
            None => (0..n).map(|j| stats.q[j][leg]).sum::<f64>() / n as f64,
        };
        let alphas: Vec<f64> = (0..n).map(|j| cam_angle(stats.q[j][leg], q0)).collect();
        let taus: Vec<f64> = (0..n).map(|j| stats.tau_g[j][leg]).collect();
        plan_leg_cam(cfg, leg, &alphas, &taus).is_ok()
    })
}

/// Rank non-skipped candidates by reduction. When cams are enabled, prefer
/// the best candidate that passes the cam torque-sign screen; fall back to
/// the plain best (with a note) when none qualify.
fn screen_candidates(
    cfg: &StudyConfig,
    records: &[CandidateRecord],
) -> Result<(CandidateRecord, Option<String>), StudyError> {
    let mut ranked: Vec<&CandidateRecord> =
        records.iter().filter(|r| r.skipped.is_none()).collect();
    ranked.sort_by(|a, b| b.reduction.partial_cmp(&a.reduction).unwrap());
    let best = *ranked.first().ok_or(WorkspaceError::NoFeasiblePlacement)?;
    if !cfg.cam.enabled {
        return Ok((best.clone(), None));
    }
    for (i, rec) in ranked.iter().enumerate() {
        if cam_screen_ok(cfg, rec.center, rec.gamma) {
            let note = (i > 0).then(|| {
                format!(
                    "note: cam screen skipped {i} higher-reduction placement(s) whose \
                     leg torques pass too close to zero for a wrapped wire\n"
                )
            });
            return Ok(((*rec).clone(), note));
        }
    }
    Ok((
        best.clone(),
        Some(
            "note: no placement passes the cam torque-sign screen; keeping the best \
             reduction (cam synthesis may fail)\n"
                .to_string(),
        ),
    ))
}

fn choose_placement(cfg: &StudyConfig, map: &WorkspaceMap) -> Result<Chosen, StudyError> {
    match (cfg.center, cfg.gamma) {
        (Some(center), Some(gamma)) => {
            let rec = evaluate_candidate(cfg, center, gamma);
            if let Some(reason) = &rec.skipped {
                return Err(StudyError::Invalid(format!(
                    "pinned placement cannot be evaluated: {reason}"
                )));
            }
            let table = candidates_table(std::slice::from_ref(&rec));
            Ok((center, gamma, None, table, None))
        }
        (Some(center), None) => {
            let records: Vec<CandidateRecord> = cfg
                .candidate_gammas
                .par_iter()
                .map(|&g| evaluate_candidate(cfg, center, g))
                .collect();
            let (best, note) = screen_candidates(cfg, &records)?;
            let table = candidates_table(&records);
            Ok((center, best.gamma, None, table, note))
        }
        (None, pinned_gamma) => {
            let gammas: Vec<f64> = match pinned_gamma {
                Some(g) => vec![g],
                None => cfg.candidate_gammas.clone(),
            };
            let mut placement = optimal_task_location(
                map,
                &cfg.geometry,
                &cfg.mass,
                &cfg.task,
                &gammas,
                &cfg.placement,
            )?;
            let (best, note) = screen_candidates(cfg, &placement.candidates)?;
            placement.center = best.center;
            placement.gamma = best.gamma;
            placement.reduction = best.reduction;
            let table = candidates_table(&placement.candidates);
            Ok((
                placement.center,
                placement.gamma,
                Some(placement),
                table,
                note,
            ))
        }
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (n - 1).max(1) as f64))
        .collect()
}

/// Per-leg data for the wire-constant search, precomputed once on the same
/// padded grid the synthesizer samples: cam angles, target value and slope,
/// and the running work integral. Everything here is independent of the wire
/// stiffness and pretension, so scoring a (k, u_t) pair is a single cheap
/// pass over the grid.
struct WireScan {
    alpha: Vec<f64>,
    fv: Vec<f64>,
    fpv: Vec<f64>,
    integ: Vec<f64>,
    n_pad: usize,
    samples: usize,
}

impl WireScan {
    fn new(f: &ModalTorque, lo: f64, hi: f64, samples: usize) -> Self {
        let samples = samples.max(16);
        let step = (hi - lo) / (samples - 1) as f64;
        let n_pad = ((0.03 / step).ceil() as usize).clamp(4, samples);
        let total = samples + 2 * n_pad;
        let alpha: Vec<f64> = (0..total)
            .map(|j| lo + step * (j as isize - n_pad as isize) as f64)
            .collect();
        let mut fv = Vec::with_capacity(total);
        let mut fpv = Vec::with_capacity(total);
        for &a in &alpha {
            let (v, d) = f.eval_with_derivative(a);
            fv.push(v);
            fpv.push(d);
        }
        let mut integ = vec![0.0; total];
        for j in 1..total {
            let (a0, a1) = (alpha[j - 1], alpha[j]);
            let m = 0.5 * (a0 + a1);
            integ[j] =
                integ[j - 1] + (a1 - a0) / 6.0 * (f.eval(a0) + 4.0 * f.eval(m) + f.eval(a1));
        }
        Self {
            alpha,
            fv,
            fpv,
            integ,
            n_pad,
            samples,
        }
    }

    /// Worst-case feasibility margin of the sampled synthesis for wire
    /// constants (k, u_t); positive predicts success. Mirrors the
    /// synthesizer's pass: the moment arm m = f / (k u) must clear the shaft
    /// and stay under the lever length (with 5% headroom inside the requested
    /// range), the contact point must stay inside the anchor circle so the
    /// free wire length is positive, pads may be trimmed but at least two
    /// must survive per side, and the unwrapped contact angle must advance at
    /// every kept step.
    fn score(&self, a_len: f64, r: f64, k: f64, u_t: f64) -> f64 {
        use std::f64::consts::PI;
        let i_ref = self.integ[self.n_pad];
        let total = self.alpha.len();
        let lo_req = self.n_pad;
        let hi_req = self.n_pad + self.samples;
        let mut score = f64::INFINITY;
        let mut lo_cut = 0usize;
        let mut end = total;
        let mut phis: Vec<f64> = Vec::with_capacity(total);
        for j in 0..total {
            let requested = j >= lo_req && j < hi_req;
            let u_sq = u_t * u_t + 2.0 * (self.integ[j] - i_ref) / k;
            let mut m = f64::NAN;
            let mut u = f64::NAN;
            let mut hard_ok = u_sq > 1e-16;
            if hard_ok {
                u = u_sq.sqrt();
                m = self.fv[j] / (k * u);
                hard_ok = m > r * (1.0 + 1e-9) && m < a_len * (1.0 - 1e-9);
            }
            if !hard_ok {
                if requested {
                    return f64::NEG_INFINITY;
                }
                if j < lo_req {
                    lo_cut = j + 1;
                    phis.clear();
                    continue;
                }
                end = j;
                break;
            }
            if requested {
                let s_low = m / (r * 1.05) - 1.0;
                let s_high = (a_len * 0.95) / m - 1.0;
                score = score.min(s_low).min(s_high);
                if score <= 0.0 {
                    return score;
                }
            }
            let mp = (self.fpv[j] / k - m * m) / u;
            let w = (r - m) / a_len;
            let nu_t = w.acos() + self.alpha[j];
            let nu_t_p = (mp / a_len) / (1.0 - w * w).max(1e-18).sqrt() + 1.0;
            if nu_t_p.abs() < 1e-6 {
                return f64::NEG_INFINITY;
            }
            let (s, c) = nu_t.sin_cos();
            let t = -mp / nu_t_p;
            let (x, y) = (-m * c - t * s, -m * s + t * c);
            score = score.min((a_len * 0.95) / x.hypot(y) - 1.0);
            if score <= 0.0 {
                return score;
            }
            phis.push(y.atan2(x));
        }
        if lo_req - lo_cut < 2 || end.saturating_sub(hi_req) < 2 {
            return f64::NEG_INFINITY;
        }
        let mono_floor = 1e-3 * (self.alpha[1] - self.alpha[0]);
        let mut prev = phis[0];
        for &p in &phis[1..] {
            let mut cur = p;
            while cur - prev > PI {
                cur -= 2.0 * PI;
            }
            while prev - cur > PI {
                cur += 2.0 * PI;
            }
            score = score.min((cur - prev) / mono_floor - 1.0);
            if score <= 0.0 {
                return score;
            }
            prev = cur;
        }
        score
    }
}

/// Pick wire constants (stiffness and, when not pinned, pretension) from log
/// grids by maximizing the worst-case feasibility margin of the single-wrap
/// synthesis, then confirm the ranked candidates by synthesizing until one
/// succeeds. Pretension matters because the wire extension grows with the
/// accumulated work, so a target whose magnitude decays along the range
/// needs a large pretension to keep the moment arm from collapsing below the
/// shaft radius. Deterministic; ties keep the smaller pretension, then the
/// softer spring.
fn auto_wire(
    desired: &ModalTorque,
    alpha_lo: f64,
    alpha_hi: f64,
    cam: &CamConfig,
    k_pinned: Option<f64>,
    u_t_pinned: Option<f64>,
) -> Result<(f64, f64), StudyError> {
    let mid = desired.eval(0.5 * (alpha_lo + alpha_hi));
    let (f, lo, hi) = if mid < 0.0 {
        (desired.mirror(), -alpha_hi, -alpha_lo)
    } else {
        (desired.clone(), alpha_lo, alpha_hi)
    };
    let scan = WireScan::new(&f, lo, hi, cam.samples);

    let k_grid = match k_pinned {
        Some(k) => vec![k],
        None => logspace(0.1, 1e5, 121),
    };
    let u_grid = match u_t_pinned {
        Some(u) => vec![u],
        None => logspace(0.02, 0.5, 25),
    };
    let mut ranked: Vec<(f64, f64, f64)> = Vec::new(); // (score, k, u_t)
    for &u_t in &u_grid {
        for &k in &k_grid {
            let s = scan.score(cam.a, cam.r, k, u_t);
            if s > 0.0 {
                ranked.push((s, k, u_t));
            }
        }
    }
    ranked.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    for &(_, k, u_t) in ranked.iter().take(60) {
        let geom = WireCamGeometry {
            a: cam.a,
            r: cam.r,
            k,
            u_t,
            q0: 0.0,
        };
        if synthesize_cam_profile(desired, alpha_lo, alpha_hi, &geom, cam.samples).is_ok() {
            return Ok((k, u_t));
        }
    }
    Err(StudyError::Invalid(format!(
        "no feasible wire constants for cam target over [{:.4}, {:.4}] \
         (torque range {:.4}..{:.4} N m, a = {}, r = {}, k {}, u_t {})",
        alpha_lo,
        alpha_hi,
        f.eval(lo),
        f.eval(hi),
        cam.a,
        cam.r,
        match k_pinned {
            Some(k) => format!("= {k}"),
            None => "searched".into(),
        },
        match u_t_pinned {
            Some(u) => format!("= {u}"),
            None => "searched".into(),
        },
    )))
}

/// One leg's accepted cam design inputs.
struct LegPlan {
    fit: ModalTorque,
    desired: ModalTorque,
    lo: f64,
    hi: f64,
    k: f64,
    u_t: f64,
    order: usize,
}

/// Fit the leg torque over the cam angle and resolve wire constants, backing
/// the fit order off when the target is unsynthesizable: a wrapped wire can
/// only realize torque profiles whose contact locus keeps advancing, and a
/// high-order fit of scattered path data can violate that at every
/// stiffness. Lower orders trade fit fidelity for synthesizability.
fn plan_leg_cam(
    cfg: &StudyConfig,
    leg: usize,
    alphas: &[f64],
    taus: &[f64],
) -> Result<LegPlan, StudyError> {
    let (mut lo, mut hi) = alphas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
            (lo.min(a), hi.max(a))
        });
    let span = (hi - lo).max(1e-6);
    lo -= cfg.cam.range_margin * span;
    hi += cfg.cam.range_margin * span;

    let max_order = cfg.cam.fit_order.min(alphas.len().saturating_sub(1)).max(1);
    let mut last: Option<StudyError> = None;
    for order in (1..=max_order).rev() {
        let fit = match fit_modal_torque(alphas, taus, order) {
            Ok(f) => f,
            Err(source) => {
                last = Some(StudyError::CamLeg { leg, source });
                continue;
            }
        };
        let desired = desired_cam_torque(&fit);
        if let Some(case) = cfg.cam.case {
            let mid = desired.eval(0.5 * (lo + hi));
            let needs_positive = case == WireCase::Two;
            if (mid > 0.0) != needs_positive {
                last = Some(StudyError::Invalid(format!(
                    "leg {}: pinned wire case {} needs a {} cam torque target, \
                     but the order-{order} target midpoint is {}",
                    leg + 1,
                    case.index(),
                    if needs_positive { "positive" } else { "negative" },
                    format_g3(mid)
                )));
                continue;
            }
        }
        match (cfg.cam.k, cfg.cam.u_t) {
            // Both pinned: validate them with the synthesizer itself rather
            // than the margin model.
            (Some(kv), Some(uv)) => {
                let geom = WireCamGeometry {
                    a: cfg.cam.a,
                    r: cfg.cam.r,
                    k: kv[leg],
                    u_t: uv[leg],
                    q0: 0.0,
                };
                match synthesize_cam_profile(&desired, lo, hi, &geom, cfg.cam.samples) {
                    Ok(_) => {
                        return Ok(LegPlan {
                            fit,
                            desired,
                            lo,
                            hi,
                            k: kv[leg],
                            u_t: uv[leg],
                            order,
                        })
                    }
                    Err(source) => last = Some(StudyError::CamLeg { leg, source }),
                }
            }
            (k_opt, u_opt) => {
                let pinned = (k_opt.map(|v| v[leg]), u_opt.map(|v| v[leg]));
                match auto_wire(&desired, lo, hi, &cfg.cam, pinned.0, pinned.1) {
                    Ok((k, u_t)) => {
                        return Ok(LegPlan {
                            fit,
                            desired,
                            lo,
                            hi,
                            k,
                            u_t,
                            order,
                        })
                    }
                    Err(StudyError::Invalid(msg)) => {
                        last = Some(StudyError::Invalid(format!("leg {}: {msg}", leg + 1)))
                    }
                    Err(other) => return Err(other),
                }
            }
        }
    }
    Err(last.unwrap_or_else(|| {
        StudyError::Invalid(format!("leg {}: no usable cam fit order", leg + 1))
    }))
}

/// Design one wire cam per leg against the gravity torque along the path,
/// then evaluate all three on the path.
pub fn design_cams(cfg: &StudyConfig, stats: &PathStatics) -> Result<CamStudy, StudyError> {
    let n = stats.len();
    if n < 2 {
        return Err(StudyError::Invalid(format!(
            "path has {n} poses but the cam torque fit needs at least 2"
        )));
    }
    let mut designs: Vec<WireCamDesign> = Vec::with_capacity(3);
    let mut fits: Vec<ModalTorque> = Vec::with_capacity(3);
    let mut fit_orders = [0usize; 3];
    for leg in 0..3 {
        let q0 = match cfg.cam.q0 {
            Some(v) => v[leg],
            None => (0..n).map(|j| stats.q[j][leg]).sum::<f64>() / n as f64,
        };
        let alphas: Vec<f64> = (0..n).map(|j| cam_angle(stats.q[j][leg], q0)).collect();
        let taus: Vec<f64> = (0..n).map(|j| stats.tau_g[j][leg]).collect();
        let plan = plan_leg_cam(cfg, leg, &alphas, &taus)?;
        fit_orders[leg] = plan.order;
        let LegPlan {
            fit,
            desired,
            lo,
            hi,
            k,
            u_t,
            ..
        } = plan;
        let geom = WireCamGeometry {
            a: cfg.cam.a,
            r: cfg.cam.r,
            k,
            u_t,
            q0,
        };
        let design = synthesize_cam_profile(&desired, lo, hi, &geom, cfg.cam.samples)
            .map_err(|source| StudyError::CamLeg { leg, source })?;
        designs.push(design);
        fits.push(fit);
    }
    let designs: [WireCamDesign; 3] = designs.try_into().expect("three legs");
    let fits: [ModalTorque; 3] = fits.try_into().expect("three legs");
    let report = balance_with_cams(&stats.poses, &cfg.geometry, &cfg.mass, &designs)?;
    Ok(CamStudy {
        designs,
        fits,
        fit_orders,
        report,
    })
}

/// Contour of mean sprung-to-unsprung torque-norm ratio over sub-workspace
/// centers at orientation `gamma`, springs held fixed.
fn contour_rows(
    cfg: &StudyConfig,
    map: &WorkspaceMap,
    gamma: f64,
    springs: &SpringSet,
) -> Vec<[f64; 3]> {
    let eval_task = TaskSpec {
        spiral_points: cfg.placement.eval_points.max(2),
        ..cfg.task.clone()
    };
    let azimuths: Vec<f64> = match cfg.scan.azimuth_span {
        None => {
            let n = ((2.0 * std::f64::consts::PI / cfg.output.contour_azimuth).round() as usize)
                .max(1);
            (0..n)
                .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / n as f64)
                .collect()
        }
        Some(span) => {
            let n = ((span / cfg.output.contour_azimuth).round() as usize).max(1);
            (0..=n).map(|i| -0.5 * span + span * i as f64 / n as f64).collect()
        }
    };
    let n_rad = cfg.output.contour_radial;
    let mut points: Vec<Vec2> = Vec::new();
    let origin_ok = map.sub_contains(Vec2::zeros());
    if origin_ok {
        points.push(Vec2::zeros());
    }
    for &az in &azimuths {
        let Some(rmax) = map.boundary_radius(az) else {
            continue;
        };
        let dir = Vec2::new(az.cos(), az.sin());
        for t in 1..=n_rad {
            let p = dir * (rmax * t as f64 / n_rad as f64);
            if map.sub_contains(p) {
                points.push(p);
            }
        }
    }
    points
        .par_iter()
        .filter_map(|&p| {
            let path = spiral_path(p, gamma, &eval_task);
            let stats = PathStatics::compute(&path, &cfg.geometry, &cfg.mass).ok()?;
            let mean0 = mean_norm(&stats.tau_g);
            let mean_s = mean_norm(&stats.torque_table(springs));
            Some([p.x, p.y, mean_s / mean0.max(1e-12)])
        })
        .collect()
}

fn boundary_table(map: &WorkspaceMap) -> Table {
    let mut columns = vec!["azimuth".to_string(), "dexterous".to_string()];
    for &g in &map.gammas {
        columns.push(format!("r_gamma{g:+.6}"));
    }
    let mut t = Table::new(columns);
    for (ai, &az) in map.azimuths.iter().enumerate() {
        let mut row = vec![az, map.boundary[ai]];
        for gi in 0..map.gammas.len() {
            row.push(map.per_gamma[gi][ai]);
        }
        t.push_row(row);
    }
    t
}

fn sub_boundary_table(map: &WorkspaceMap) -> Table {
    let mut t = Table::new(vec!["azimuth", "inner", "outer"]);
    for (ai, &az) in map.azimuths.iter().enumerate() {
        let (inner, outer) = map.sub_span[ai].unwrap_or((f64::NAN, f64::NAN));
        t.push_row(vec![az, inner, outer]);
    }
    t
}

fn path_table(path: &[Pose]) -> Table {
    let mut t = Table::new(vec!["x", "y", "gamma"]);
    for p in path {
        t.push_row(vec![p.position.x, p.position.y, p.gamma]);
    }
    t
}

fn torque_table(path: &[Pose], torques: &[Vec3]) -> Table {
    let mut t = Table::new(vec!["x", "y", "gamma", "tau_1", "tau_2", "tau_3"]);
    for (p, tau) in path.iter().zip(torques) {
        t.push_row(vec![p.position.x, p.position.y, p.gamma, tau[0], tau[1], tau[2]]);
    }
    t
}

fn cams_table(cams: &CamStudy) -> Table {
    let mut t = Table::new(vec![
        "leg", "case", "mirrored", "fit_order", "a", "r", "k", "u_t", "q0", "attach", "l_ref",
        "alpha_lo", "alpha_hi", "e_tau",
    ]);
    for (i, d) in cams.designs.iter().enumerate() {
        let (lo, hi) = d.public_alpha_range();
        t.push_row(vec![
            (i + 1) as f64,
            d.case.index() as f64,
            if d.mirrored { 1.0 } else { 0.0 },
            cams.fit_orders[i] as f64,
            d.geom.a,
            d.geom.r,
            d.geom.k,
            d.geom.u_t,
            d.geom.q0,
            d.attach,
            d.l_ref,
            lo,
            hi,
            cams.report.e_tau[i],
        ]);
    }
    t
}

/// Polar samples and a closed Cartesian outline (profile arc, then the hub
/// center, then back to the first point).
fn cam_shape_tables(design: &WireCamDesign) -> (Table, Table) {
    let (phi, g) = design.profile.samples();
    let mut profile = Table::new(vec!["phi", "g"]);
    for (&p, &gv) in phi.iter().zip(g) {
        profile.push_row(vec![p, gv]);
    }
    let mut outline = Table::new(vec!["x", "y"]);
    for (&p, &gv) in phi.iter().zip(g) {
        outline.push_row(vec![gv * p.cos(), gv * p.sin()]);
    }
    outline.push_row(vec![0.0, 0.0]);
    outline.push_row(vec![g[0] * phi[0].cos(), g[0] * phi[0].sin()]);
    (profile, outline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StudyConfig;

    /// Small, fast study config used by the orchestration tests.
    pub(super) fn quick_config() -> StudyConfig {
        let text = "\
[study]
label = quick
[geometry]
layout = wide
[mass]
[task]
radius = 0.03
spiral_points = 60
[workspace]
angular_resolution_deg = 6
orientation_resolution_deg = 15
[placement]
azimuth_stride = 10
radial_samples = 3
eval_points = 40
eval_starts = 1
candidate_gammas_deg = 0 10
[solver]
starts = 2
max_iters = 120
modes = 1
[cam]
samples = 64
fit_order = 2
[output]
svg = true
contour_azimuth_deg = 45
contour_radial = 3
";
        StudyConfig::from_text(text, true).unwrap()
    }

    #[test]
    fn full_run_emits_expected_artifacts_deterministically() {
        let cfg = quick_config();
        let a = run_study(&cfg).unwrap();
        let names: Vec<&str> = a
            .bundle
            .artifacts
            .iter()
            .map(|(n, _)| n.as_str())
            .collect();
        for expected in [
            "boundary.csv",
            "sub_boundary.csv",
            "placement.csv",
            "path.csv",
            "torque_mode0.csv",
            "torque_mode1.csv",
            "springs.csv",
            "torque_cam.csv",
            "cams.csv",
            "cam_profile_leg1.csv",
            "cam_outline_leg3.csv",
            "e_tau.csv",
            "contour.csv",
            "contour.svg",
            "summary.txt",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        let mode1 = &a.modes[0];
        let e = mode1.e_tau.unwrap();
        for v in e {
            assert!(v.is_finite() && v > 0.0);
        }
        let cams = a.cams.as_ref().unwrap();
        for v in cams.report.e_tau {
            assert!(v.is_finite() && v >= 0.0 && v < 1.0, "cam e_tau {v}");
        }

        // Artifact bytes are a pure function of the config.
        let b = run_study(&cfg).unwrap();
        assert_eq!(a.bundle.artifacts.len(), b.bundle.artifacts.len());
        for ((na, aa), (nb, ab)) in a.bundle.artifacts.iter().zip(&b.bundle.artifacts) {
            assert_eq!(na, nb);
            assert_eq!(aa, ab, "artifact {na} differs between runs");
        }
    }

    #[test]
    fn stages_are_cumulative() {
        let cfg = quick_config();
        let w = run_study_stage(&cfg, Stage::Workspace).unwrap();
        assert!(w.center.is_none());
        assert_eq!(w.bundle.artifacts.len(), 3); // boundary, sub_boundary, summary
        let p = run_study_stage(&cfg, Stage::Place).unwrap();
        assert!(p.center.is_some());
        assert!(p.modes.is_empty());
        let o = run_study_stage(&cfg, Stage::Optimize).unwrap();
        assert_eq!(o.modes.len(), 1);
        assert!(o.cams.is_none());
        let c = run_study_stage(&cfg, Stage::Cam).unwrap();
        assert!(c.cams.is_some());
        assert!(!c
            .bundle
            .artifacts
            .iter()
            .any(|(n, _)| n == "contour.csv"));
    }

    #[test]
    fn pinned_placement_skips_search() {
        let mut cfg = quick_config();
        cfg.center = Some(Vec2::new(0.0, 0.01));
        cfg.gamma = Some(0.0);
        let out = run_study_stage(&cfg, Stage::Place).unwrap();
        assert_eq!(out.center.unwrap(), Vec2::new(0.0, 0.01));
        assert_eq!(out.gamma.unwrap(), 0.0);
        assert!(out.placement.is_none());
        let table = out
            .bundle
            .artifacts
            .iter()
            .find_map(|(n, a)| match (n.as_str(), a) {
                ("placement.csv", Artifact::Csv(t)) => Some(t),
                _ => None,
            })
            .unwrap();
        assert_eq!(table.rows.len(), 1);
    }

    #[test]
    fn cam_disabled_omits_cam_artifacts() {
        let mut cfg = quick_config();
        cfg.cam.enabled = false;
        let out = run_study(&cfg).unwrap();
        assert!(out.cams.is_none());
        assert!(!out.bundle.artifacts.iter().any(|(n, _)| n.starts_with("cam")));
        // e_tau table still has the mode rows.
        let table = out
            .bundle
            .artifacts
            .iter()
            .find_map(|(n, a)| match (n.as_str(), a) {
                ("e_tau.csv", Artifact::Csv(t)) => Some(t),
                _ => None,
            })
            .unwrap();
        assert_eq!(table.rows.len(), 2); // mode0 + mode1
    }
}

#[cfg(test)]
mod debug_scratch {
    use super::*;
    use crate::config::StudyConfig;

    fn diagnose(cfg: &StudyConfig) {
        let scanned = scan_dexterous_workspace(&cfg.geometry, &cfg.task, &cfg.scan).unwrap();
        let map = compute_sub_workspace(&scanned, &cfg.task).unwrap();
        let t0 = std::time::Instant::now();
        let (center, gamma, _, _, note) = choose_placement(cfg, &map).unwrap();
        println!(
            "[{}] center = ({:.5}, {:.5}), gamma = {:.5} rad ({:.1} deg)  [placement {:.1}s]",
            cfg.label, center.x, center.y, gamma, gamma.to_degrees(), t0.elapsed().as_secs_f64()
        );
        if let Some(note) = note {
            print!("{note}");
        }
        let path = spiral_path(center, gamma, &cfg.task);
        let stats = PathStatics::compute(&path, &cfg.geometry, &cfg.mass).unwrap();
        let n = stats.len();
        for leg in 0..3 {
            let q0 = (0..n).map(|j| stats.q[j][leg]).sum::<f64>() / n as f64;
            let alphas: Vec<f64> = (0..n).map(|j| cam_angle(stats.q[j][leg], q0)).collect();
            let taus: Vec<f64> = (0..n).map(|j| stats.tau_g[j][leg]).collect();
            let tmin = taus.iter().cloned().fold(f64::INFINITY, f64::min);
            let tmax = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            print!("  leg {leg}: q0={q0:.4} tau=[{tmin:.4},{tmax:.4}]");
            let t1 = std::time::Instant::now();
            match plan_leg_cam(cfg, leg, &alphas, &taus) {
                Ok(p) => println!(
                    "  order={} k={:.2} u_t={:.3} [{:.2}s]",
                    p.order, p.k, p.u_t, t1.elapsed().as_secs_f64()
                ),
                Err(e) => println!("  INFEASIBLE: {e} [{:.2}s]", t1.elapsed().as_secs_f64()),
            }
        }
    }

    #[test]
    #[ignore]
    fn print_default_study_cam_feasibility() {
        diagnose(&StudyConfig::wide_default());
        diagnose(&StudyConfig::narrow_default());
    }

    #[test]
    #[ignore]
    fn print_nl_candidate_sign_ratios() {
        let cfg = StudyConfig::narrow_default();
        let scanned = scan_dexterous_workspace(&cfg.geometry, &cfg.task, &cfg.scan).unwrap();
        let map = compute_sub_workspace(&scanned, &cfg.task).unwrap();
        let placement = optimal_task_location(
            &map, &cfg.geometry, &cfg.mass, &cfg.task, &cfg.candidate_gammas, &cfg.placement,
        ).unwrap();
        let eval_task = TaskSpec {
            spiral_points: cfg.placement.eval_points.max(2),
            ..cfg.task.clone()
        };
        let mut rows: Vec<(f64, f64, Vec2, f64)> = Vec::new(); // (ratio, reduction, center, gamma)
        for rec in placement.candidates.iter().filter(|r| r.skipped.is_none()) {
            let path = spiral_path(rec.center, rec.gamma, &eval_task);
            let Ok(stats) = PathStatics::compute(&path, &cfg.geometry, &cfg.mass) else {
                continue;
            };
            let mut worst = f64::INFINITY;
            for leg in 0..3 {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for row in &stats.tau_g {
                    let v = row[leg].abs();
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                worst = worst.min(if hi > 0.0 { lo / hi } else { 0.0 });
            }
            rows.push((worst, rec.reduction, rec.center, rec.gamma));
        }
        rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        println!("top by worst-leg ratio:");
        for (ratio, red, c, g) in rows.iter().take(12) {
            println!(
                "  ratio={ratio:.3} reduction={red:.3} center=({:.4},{:.4}) gamma={:.1} deg",
                c.x, c.y, g.to_degrees()
            );
        }
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        println!("top by reduction:");
        for (ratio, red, c, g) in rows.iter().take(12) {
            println!(
                "  ratio={ratio:.3} reduction={red:.3} center=({:.4},{:.4}) gamma={:.1} deg",
                c.x, c.y, g.to_degrees()
            );
        }
    }

    #[test]
    #[ignore]
    fn print_nl_best_ratio_candidate_plans() {
        let cfg = StudyConfig::narrow_default();
        let eval_task = TaskSpec {
            spiral_points: cfg.placement.eval_points.max(2),
            ..cfg.task.clone()
        };
        for (cx, cy, gdeg) in [(0.0264, -0.0542, 30.0), (0.0183, -0.0683, 20.0)] {
            println!("candidate ({cx}, {cy}, {gdeg} deg):");
            let path = spiral_path(Vec2::new(cx, cy), (gdeg as f64).to_radians(), &eval_task);
            let stats = PathStatics::compute(&path, &cfg.geometry, &cfg.mass).unwrap();
            let n = stats.len();
            for leg in 0..3 {
                let q0 = (0..n).map(|j| stats.q[j][leg]).sum::<f64>() / n as f64;
                let alphas: Vec<f64> = (0..n).map(|j| cam_angle(stats.q[j][leg], q0)).collect();
                let taus: Vec<f64> = (0..n).map(|j| stats.tau_g[j][leg]).collect();
                let tmin = taus.iter().cloned().fold(f64::INFINITY, f64::min);
                let tmax = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                // correlate sign of tau with alpha direction
                let fit1 = fit_modal_torque(&alphas, &taus, 1).unwrap();
                println!(
                    "  leg {leg}: tau=[{tmin:.4},{tmax:.4}] lin=[{:.4} + {:.4} a]",
                    fit1.coeffs[0], fit1.coeffs[1]
                );
                match plan_leg_cam(&cfg, leg, &alphas, &taus) {
                    Ok(p) => println!("    plan: order={} k={:.2} u_t={:.3}", p.order, p.k, p.u_t),
                    Err(e) => println!("    plan FAILED: {e}"),
                }
            }
        }
    }

    #[test]
    #[ignore]
    fn survey_nl_cam_friendly_placements() {
        let cfg = StudyConfig::narrow_default();
        let scanned = scan_dexterous_workspace(&cfg.geometry, &cfg.task, &cfg.scan).unwrap();
        let map = compute_sub_workspace(&scanned, &cfg.task).unwrap();
        let eval_task = TaskSpec {
            spiral_points: 40,
            ..cfg.task.clone()
        };
        let mut friendly: Vec<(f64, Vec2, f64, [f64; 3])> = Vec::new();
        let mut tested = 0usize;
        for ai in 0..map.azimuths.len() {
            let Some((inner, outer)) = map.sub_span[ai] else { continue };
            if outer - inner < 1e-9 {
                continue;
            }
            let az = map.azimuths[ai];
            let dir = Vec2::new(az.cos(), az.sin());
            for ri in 0..5 {
                let r = inner + (outer - inner) * ri as f64 / 4.0;
                let center = dir * r;
                for gdeg in [-30.0f64, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0] {
                    let gamma = gdeg.to_radians();
                    tested += 1;
                    let path = spiral_path(center, gamma, &eval_task);
                    let Ok(stats) = PathStatics::compute(&path, &cfg.geometry, &cfg.mass) else {
                        continue;
                    };
                    let n = stats.len();
                    let mut worst_ratio = f64::INFINITY;
                    let mut ok = true;
                    let mut slopes = [0.0f64; 3];
                    for leg in 0..3 {
                        let q0 = (0..n).map(|j| stats.q[j][leg]).sum::<f64>() / n as f64;
                        let alphas: Vec<f64> =
                            (0..n).map(|j| cam_angle(stats.q[j][leg], q0)).collect();
                        let taus: Vec<f64> = (0..n).map(|j| stats.tau_g[j][leg]).collect();
                        let (mut lo_t, mut hi_t) = (f64::INFINITY, 0.0f64);
                        for &t in &taus {
                            lo_t = lo_t.min(t.abs());
                            hi_t = hi_t.max(t.abs());
                        }
                        let ratio = if hi_t > 0.0 { lo_t / hi_t } else { 0.0 };
                        worst_ratio = worst_ratio.min(ratio);
                        if ratio < 0.05 {
                            ok = false;
                            break;
                        }
                        let fit1 = fit_modal_torque(&alphas, &taus, 1).unwrap();
                        slopes[leg] = fit1.coeffs[1];
                        let easy = fit1.coeffs[1] < 0.0;
                        let swing = hi_t / lo_t;
                        if !easy && swing > 4.0 {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        friendly.push((worst_ratio, center, gamma, slopes));
                    }
                }
            }
        }
        println!("tested {tested}, cam-friendly {}", friendly.len());
        friendly.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for (ratio, c, g, s) in friendly.iter().take(15) {
            println!(
                "  ratio={ratio:.3} center=({:.4},{:.4}) gamma={:.1} slopes=[{:.2},{:.2},{:.2}]",
                c.x, c.y, g.to_degrees(), s[0], s[1], s[2]
            );
        }
    }

    #[test]
    #[ignore]
    fn survey_nl_mode_ordering_at_cam_feasible_placements() {
        let cfg = StudyConfig::narrow_default();
        let scanned = scan_dexterous_workspace(&cfg.geometry, &cfg.task, &cfg.scan).unwrap();
        let map = compute_sub_workspace(&scanned, &cfg.task).unwrap();
        let placement = optimal_task_location(
            &map, &cfg.geometry, &cfg.mass, &cfg.task, &cfg.candidate_gammas, &cfg.placement,
        )
        .unwrap();
        let eval_task = TaskSpec {
            spiral_points: cfg.placement.eval_points.max(2),
            ..cfg.task.clone()
        };
        let mut rows = Vec::new();
        for rec in placement.candidates.iter().filter(|r| r.skipped.is_none()) {
            if !cam_screen_ok(&cfg, rec.center, rec.gamma) {
                continue;
            }
            let path = spiral_path(rec.center, rec.gamma, &eval_task);
            let stats = PathStatics::compute(&path, &cfg.geometry, &cfg.mass).unwrap();
            let m1 = optimize_springs(&stats, BalancingMode::Mode1, None, &cfg.solver).unwrap();
            let m2 = optimize_springs(&stats, BalancingMode::Mode2, None, &cfg.solver).unwrap();
            let mean = |e: Option<[f64; 3]>| e.map(|v| (v[0] + v[1] + v[2]) / 3.0);
            rows.push((
                rec.reduction,
                rec.center,
                rec.gamma,
                mean(m1.e_tau).unwrap_or(f64::NAN),
                mean(m2.e_tau).unwrap_or(f64::NAN),
            ));
        }
        rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        println!("cam-feasible candidates: {}", rows.len());
        for (red, c, g, m1, m2) in &rows {
            let ord = if m1 < m2 { "M1<M2" } else { "M2<=M1" };
            println!(
                "  reduction={red:.3} center=({:.4},{:.4}) gamma={:.0} deg  mode1={m1:.3} mode2={m2:.3}  {ord}",
                c.x, c.y,
                g.to_degrees()
            );
        }
    }

    #[test]
    #[ignore]
    fn trace_argmax_placements_full_gamma_set() {
        for mut cfg in [StudyConfig::wide_default(), StudyConfig::narrow_default()] {
            cfg.candidate_gammas = (-3..=3).map(|g| (g as f64) * 10.0f64.to_radians()).collect();
            let scanned = scan_dexterous_workspace(&cfg.geometry, &cfg.task, &cfg.scan).unwrap();
            let map = compute_sub_workspace(&scanned, &cfg.task).unwrap();
            let placement = optimal_task_location(
                &map, &cfg.geometry, &cfg.mass, &cfg.task, &cfg.candidate_gammas, &cfg.placement,
            )
            .unwrap();
            let mut recs: Vec<_> = placement
                .candidates
                .iter()
                .filter(|r| r.skipped.is_none())
                .collect();
            recs.sort_by(|a, b| b.reduction.partial_cmp(&a.reduction).unwrap());
            let eval_task = TaskSpec {
                spiral_points: cfg.placement.eval_points.max(2),
                ..cfg.task.clone()
            };
            println!("=== {} argmax trace ===", cfg.label);
            for rec in recs.iter().take(5) {
                let path = spiral_path(rec.center, rec.gamma, &eval_task);
                let stats = PathStatics::compute(&path, &cfg.geometry, &cfg.mass).unwrap();
                let n = stats.len();
                let m1 = optimize_springs(&stats, BalancingMode::Mode1, None, &cfg.solver).unwrap();
                let m2 = optimize_springs(&stats, BalancingMode::Mode2, None, &cfg.solver).unwrap();
                let mean =
                    |e: Option<[f64; 3]>| e.map(|v| (v[0] + v[1] + v[2]) / 3.0).unwrap_or(f64::NAN);
                println!(
                    "  reduction={:.3} center=({:.4},{:.4}) gamma={:.0}  mode1={:.3} mode2={:.3}",
                    rec.reduction,
                    rec.center.x,
                    rec.center.y,
                    rec.gamma.to_degrees(),
                    mean(m1.e_tau),
                    mean(m2.e_tau)
                );
                for leg in 0..3 {
                    let q0 = (0..n).map(|j| stats.q[j][leg]).sum::<f64>() / n as f64;
                    let alphas: Vec<f64> =
                        (0..n).map(|j| cam_angle(stats.q[j][leg], q0)).collect();
                    let taus: Vec<f64> = (0..n).map(|j| stats.tau_g[j][leg]).collect();
                    let tmin = taus.iter().cloned().fold(f64::INFINITY, f64::min);
                    let tmax = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    match plan_leg_cam(&cfg, leg, &alphas, &taus) {
                        Ok(p) => println!(
                            "    leg {leg}: tau=[{tmin:.4},{tmax:.4}] plan order={} k={:.2} u_t={:.3}",
                            p.order, p.k, p.u_t
                        ),
                        Err(e) => {
                            println!("    leg {leg}: tau=[{tmin:.4},{tmax:.4}] plan FAILED: {e}")
                        }
                    }
                }
            }
        }
    }

    #[test]
    #[ignore]
    fn survey_nl_mode_ordering_fine_grid() {
        let cfg = StudyConfig::narrow_default();
        let scanned = scan_dexterous_workspace(&cfg.geometry, &cfg.task, &cfg.scan).unwrap();
        let map = compute_sub_workspace(&scanned, &cfg.task).unwrap();
        let eval_task = TaskSpec {
            spiral_points: cfg.placement.eval_points.max(2),
            ..cfg.task.clone()
        };
        let quick = SolverOptions {
            starts: 4,
            ..cfg.solver.clone()
        };
        let mut rows = Vec::new();
        let mut tested = 0usize;
        for ai in (0..map.azimuths.len()).step_by(5) {
            let Some((inner, outer)) = map.sub_span[ai] else { continue };
            if outer - inner < 1e-9 {
                continue;
            }
            let az = map.azimuths[ai];
            let dir = Vec2::new(az.cos(), az.sin());
            for ri in 0..9 {
                let rad = inner + (outer - inner) * ri as f64 / 8.0;
                let center = dir * rad;
                for gdeg in [10.0f64, 15.0, 20.0, 25.0, 30.0] {
                    let gamma = gdeg.to_radians();
                    tested += 1;
                    if !cam_screen_ok(&cfg, center, gamma) {
                        continue;
                    }
                    let path = spiral_path(center, gamma, &eval_task);
                    let Ok(stats) = PathStatics::compute(&path, &cfg.geometry, &cfg.mass) else {
                        continue;
                    };
                    let m1 = optimize_springs(&stats, BalancingMode::Mode1, None, &quick).unwrap();
                    let m2 = optimize_springs(&stats, BalancingMode::Mode2, None, &quick).unwrap();
                    let mean = |e: Option<[f64; 3]>| {
                        e.map(|v| (v[0] + v[1] + v[2]) / 3.0).unwrap_or(f64::NAN)
                    };
                    let e1 = m1.e_tau.unwrap_or([f64::NAN; 3]);
                    rows.push((mean(m1.e_tau), mean(m2.e_tau), center, gamma, e1));
                }
            }
        }
        println!("tested {tested}, cam-feasible {}", rows.len());
        // sort by mode1-mode2 gap, most favorable to mode1 first
        rows.sort_by(|a, b| (a.0 - a.1).partial_cmp(&(b.0 - b.1)).unwrap());
        for (m1, m2, c, g, e1) in rows.iter().take(20) {
            let ord = if m1 < m2 { "M1<M2" } else { "M2<=M1" };
            println!(
                "  center=({:.4},{:.4}) gamma={:.0} deg  mode1={m1:.3} [{:.2},{:.2},{:.2}] mode2={m2:.3}  {ord}",
                c.x, c.y,
                g.to_degrees(),
                e1[0], e1[1], e1[2]
            );
        }
    }

    #[test]
    #[ignore]
    fn print_default_study_summaries() {
        for cfg in [StudyConfig::wide_default(), StudyConfig::narrow_default()] {
            let t0 = std::time::Instant::now();
            match run_study(&cfg) {
                Ok(out) => println!(
                    "=== {} ({:.1}s) ===\n{}",
                    cfg.label,
                    t0.elapsed().as_secs_f64(),
                    out.summary
                ),
                Err(e) => println!(
                    "=== {} ({:.1}s) FAILED: {e}",
                    cfg.label,
                    t0.elapsed().as_secs_f64()
                ),
            }
        }
    }

    #[test]
    #[ignore]
    fn quick_leg3_search_trace() {
        let cfg = super::tests::quick_config();
        let out = run_study_stage(&cfg, Stage::Optimize).unwrap();
        let center = out.center.unwrap();
        let gamma = out.gamma.unwrap();
        let path = spiral_path(center, gamma, &cfg.task);
        let stats = PathStatics::compute(&path, &cfg.geometry, &cfg.mass).unwrap();
        let n = stats.len();
        let leg = 2;
        let q0 = (0..n).map(|j| stats.q[j][leg]).sum::<f64>() / n as f64;
        let alphas: Vec<f64> = (0..n).map(|j| cam_angle(stats.q[j][leg], q0)).collect();
        let taus: Vec<f64> = (0..n).map(|j| stats.tau_g[j][leg]).collect();
        let fit = fit_modal_torque(&alphas, &taus, cfg.cam.fit_order).unwrap();
        let desired = desired_cam_torque(&fit);
        let (mut lo, mut hi) = alphas.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
        let span = hi - lo;
        lo -= cfg.cam.range_margin * span;
        hi += cfg.cam.range_margin * span;
        println!("desired coeffs: {:?}", desired.coeffs);
        println!("alpha range [{lo:.4}, {hi:.4}], mid target {:.4}", desired.eval(0.5*(lo+hi)));
        let mid = desired.eval(0.5 * (lo + hi));
        let (f, slo, shi) = if mid < 0.0 {
            (desired.mirror(), -hi, -lo)
        } else {
            (desired.clone(), lo, hi)
        };
        let scan = WireScan::new(&f, slo, shi, cfg.cam.samples);
        let mut ranked: Vec<(f64, f64, f64)> = Vec::new();
        for &u_t in &logspace(0.02, 0.5, 25) {
            for &k in &logspace(0.1, 1e5, 121) {
                let s = scan.score(cfg.cam.a, cfg.cam.r, k, u_t);
                if s > 0.0 {
                    ranked.push((s, k, u_t));
                }
            }
        }
        ranked.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        println!("positive-score candidates: {}", ranked.len());
        for &(s, k, u_t) in ranked.iter().take(10) {
            let geom = WireCamGeometry { a: cfg.cam.a, r: cfg.cam.r, k, u_t, q0: 0.0 };
            let res = synthesize_cam_profile(&desired, lo, hi, &geom, cfg.cam.samples);
            println!("  score {s:.4} k={k:.3} u_t={u_t:.4} -> {:?}", res.err());
        }
        println!("f' at lo/mid/hi: {:.4} {:.4} {:.4}",
            f.eval_with_derivative(slo).1,
            f.eval_with_derivative(0.5 * (slo + shi)).1,
            f.eval_with_derivative(shi).1);
        // margin breakdown at hand-picked constants
        for (k, u_t) in [(4.64, 0.5), (2.0, 0.5), (10.0, 0.2), (23.0, 0.1)] {
            breakdown(&scan, cfg.cam.a, cfg.cam.r, k, u_t);
        }
    }

    fn breakdown(scan: &WireScan, a_len: f64, r: f64, k: f64, u_t: f64) {
        use std::f64::consts::PI;
        let i_ref = scan.integ[scan.n_pad];
        let total = scan.alpha.len();
        let (lo_req, hi_req) = (scan.n_pad, scan.n_pad + scan.samples);
        let mut worst = (f64::INFINITY, String::new());
        let mut note = |v: f64, what: String| {
            if v < worst.0 {
                worst = (v, what);
            }
        };
        let mut lo_cut = 0usize;
        let mut end = total;
        let mut phis: Vec<f64> = Vec::with_capacity(total);
        for j in 0..total {
            let requested = j >= lo_req && j < hi_req;
            let alpha = scan.alpha[j];
            let u_sq = u_t * u_t + 2.0 * (scan.integ[j] - i_ref) / k;
            let mut m = f64::NAN;
            let mut u = f64::NAN;
            let mut hard_ok = u_sq > 1e-16;
            if hard_ok {
                u = u_sq.sqrt();
                m = scan.fv[j] / (k * u);
                hard_ok = m > r * (1.0 + 1e-9) && m < a_len * (1.0 - 1e-9);
            }
            if !hard_ok {
                if requested {
                    note(f64::NEG_INFINITY, format!("hard fail at {alpha:.4}: u_sq={u_sq:.3e} m={m:.4}"));
                    break;
                }
                if j < lo_req {
                    lo_cut = j + 1;
                    phis.clear();
                    continue;
                }
                end = j;
                break;
            }
            if requested {
                note(m / (r * 1.05) - 1.0, format!("s_low at {alpha:.4} m={m:.4}"));
                note((a_len * 0.95) / m - 1.0, format!("s_high at {alpha:.4} m={m:.4}"));
            }
            let mp = (scan.fpv[j] / k - m * m) / u;
            let w = (r - m) / a_len;
            let nu_t = w.acos() + alpha;
            let nu_t_p = (mp / a_len) / (1.0 - w * w).max(1e-18).sqrt() + 1.0;
            if nu_t_p.abs() < 1e-6 {
                note(f64::NEG_INFINITY, format!("stationary at {alpha:.4}"));
                break;
            }
            let (s, c) = nu_t.sin_cos();
            let t = -mp / nu_t_p;
            phis.push((-m * s + t * c).atan2(-m * c - t * s));
        }
        if lo_req - lo_cut < 2 || end.saturating_sub(hi_req) < 2 {
            note(
                f64::NEG_INFINITY,
                format!("pads: kept_lo={} kept_hi={}", lo_req - lo_cut, end.saturating_sub(hi_req)),
            );
        }
        let mono_floor = 1e-3 * (scan.alpha[1] - scan.alpha[0]);
        if !phis.is_empty() {
            let mut prev = phis[0];
            for (i, &p) in phis[1..].iter().enumerate() {
                let mut cur = p;
                while cur - prev > PI {
                    cur -= 2.0 * PI;
                }
                while prev - cur > PI {
                    cur += 2.0 * PI;
                }
                note(
                    (cur - prev) / mono_floor - 1.0,
                    format!("mono at {:.4} dphi={:.3e}", scan.alpha[lo_cut + i + 1], cur - prev),
                );
                prev = cur;
            }
        }
        println!("k={k} u_t={u_t}: worst {} [{}]", worst.0, worst.1);
    }
}
