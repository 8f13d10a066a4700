//! Plain-text study configuration.
//!
//! Format: `[section]` headers, one `key = value` assignment per line, `#`
//! comments (full-line or trailing). Values are whitespace-separated tokens.
//! Unknown keys are rejected in strict mode and ignored otherwise; `[geometry]`
//! and `[mass]` must be present in strict mode and fall back to the layout
//! defaults otherwise. All angles in config files are degrees unless the key
//! says otherwise; lengths are meters, masses kilograms, stiffnesses N m/rad
//! (torsion) or N/m (wire springs).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kinematics::{LayoutTag, RobotGeometry, Vec2};
use crate::spring_opt::{BalancingMode, SolverOptions};
use crate::statics::MassModel;
use crate::wirecam::WireCase;
use crate::workspace::{PlacementOptions, ScanSettings, TaskSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config [{section}] {key} (line {line}): {message}")]
    Value {
        section: String,
        key: String,
        line: usize,
        message: String,
    },
    #[error("config is missing required section [{0}]")]
    MissingSection(String),
    #[error("config [{section}] is missing required key '{key}'")]
    MissingKey { section: String, key: String },
    #[error("config has unknown key '{key}' in [{section}] (line {line})")]
    UnknownKey {
        section: String,
        key: String,
        line: usize,
    },
    #[error("config has unknown section [{section}] (line {line})")]
    UnknownSection { section: String, line: usize },
    #[error("config is invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

#[derive(Debug, Clone)]
struct SectionData {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed but uninterpreted config text: sections of key/value entries.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, SectionData>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut current: Option<String> = None;
        for (idx, line_raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match line_raw.find('#') {
                Some(p) => &line_raw[..p],
                None => line_raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    message: "section header must look like [name]".into(),
                })?;
                let name = name.trim().to_ascii_lowercase();
                if name.is_empty() {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        message: "empty section name".into(),
                    });
                }
                if raw.sections.contains_key(&name) {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        message: format!("section [{name}] declared twice"),
                    });
                }
                raw.sections.insert(
                    name.clone(),
                    SectionData {
                        line: line_no,
                        entries: BTreeMap::new(),
                    },
                );
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: "expected 'key = value'".into(),
                });
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            let Some(section) = current.clone() else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: format!("key '{key}' appears before any [section]"),
                });
            };
            let entries = &mut raw.sections.get_mut(&section).unwrap().entries;
            if entries.contains_key(&key) {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: format!("duplicate key '{key}' in [{section}]"),
                });
            }
            entries.insert(
                key,
                Entry {
                    value,
                    line: line_no,
                    used: false,
                },
            );
        }
        Ok(raw)
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let sec = self.sections.get_mut(section)?;
        let entry = sec.entries.get_mut(key)?;
        entry.used = true;
        Some((entry.value.clone(), entry.line))
    }

    /// First unused entry / unknown section, for strict-mode rejection.
    fn first_unused(&self, known_sections: &[&str]) -> Option<ConfigError> {
        for (name, sec) in &self.sections {
            if !known_sections.contains(&name.as_str()) {
                return Some(ConfigError::UnknownSection {
                    section: name.clone(),
                    line: sec.line,
                });
            }
            for (key, entry) in &sec.entries {
                if !entry.used {
                    return Some(ConfigError::UnknownKey {
                        section: name.clone(),
                        key: key.clone(),
                        line: entry.line,
                    });
                }
            }
        }
        None
    }
}

fn value_err(section: &str, key: &str, line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        section: section.into(),
        key: key.into(),
        line,
        message: message.into(),
    }
}

fn parse_floats(
    section: &str,
    key: &str,
    value: &str,
    line: usize,
) -> Result<Vec<f64>, ConfigError> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| value_err(section, key, line, format!("'{t}' is not a number")))
        })
        .collect()
}

/// One scalar float.
fn take_f64(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
    default: f64,
) -> Result<f64, ConfigError> {
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => {
            let vals = parse_floats(section, key, &v, line)?;
            if vals.len() != 1 {
                return Err(value_err(section, key, line, "expected one number"));
            }
            Ok(vals[0])
        }
    }
}

fn take_usize(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
    default: usize,
) -> Result<usize, ConfigError> {
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| value_err(section, key, line, "expected a nonnegative integer")),
    }
}

fn take_bool(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
    default: bool,
) -> Result<bool, ConfigError> {
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => match v.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(value_err(
                section,
                key,
                line,
                format!("'{other}' is not a boolean"),
            )),
        },
    }
}

/// One value broadcast to three, or exactly three values.
fn take_triple(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
    default: [f64; 3],
) -> Result<[f64; 3], ConfigError> {
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => {
            let vals = parse_floats(section, key, &v, line)?;
            match vals.len() {
                1 => Ok([vals[0]; 3]),
                3 => Ok([vals[0], vals[1], vals[2]]),
                n => Err(value_err(
                    section,
                    key,
                    line,
                    format!("expected 1 or 3 numbers, got {n}"),
                )),
            }
        }
    }
}

/// `auto` or one-or-three values.
fn take_auto_triple(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
) -> Result<Option<[f64; 3]>, ConfigError> {
    match raw.take(section, key) {
        None => Ok(None),
        Some((v, line)) => {
            if v.trim().eq_ignore_ascii_case("auto") {
                return Ok(None);
            }
            let vals = parse_floats(section, key, &v, line)?;
            match vals.len() {
                1 => Ok(Some([vals[0]; 3])),
                3 => Ok(Some([vals[0], vals[1], vals[2]])),
                n => Err(value_err(
                    section,
                    key,
                    line,
                    format!("expected 'auto' or 1 or 3 numbers, got {n}"),
                )),
            }
        }
    }
}

const DEG: f64 = PI / 180.0;

/// Wire-cam hardware constants and synthesis knobs.
#[derive(Debug, Clone)]
pub struct CamConfig {
    pub enabled: bool,
    /// Pinned wire case, or None to pick by torque sign (1 or 2).
    pub case: Option<WireCase>,
    pub a: f64,
    pub r: f64,
    /// Wire pretension per leg, or None for the automatic feasibility search.
    pub u_t: Option<[f64; 3]>,
    /// Wire spring rates, or None for the automatic feasibility search.
    pub k: Option<[f64; 3]>,
    /// Cam mounting offsets, or None to center the range on the path.
    pub q0: Option<[f64; 3]>,
    pub samples: usize,
    pub fit_order: usize,
    /// Extra cam-angle range beyond the path span, as a fraction.
    pub range_margin: f64,
}

impl Default for CamConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            case: None,
            a: 0.25,
            r: 0.04,
            u_t: None,
            k: None,
            q0: None,
            samples: 721,
            fit_order: 4,
            range_margin: 0.05,
        }
    }
}

/// Report emission knobs.
#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub svg: bool,
    /// Contour grid azimuth step (radians).
    pub contour_azimuth: f64,
    /// Contour grid radial sample count.
    pub contour_radial: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            svg: false,
            contour_azimuth: 5.0 * DEG,
            contour_radial: 12,
        }
    }
}

/// Everything a study run needs, interpreted and validated.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub label: String,
    pub geometry: RobotGeometry,
    pub mass: MassModel,
    pub task: TaskSpec,
    pub scan: ScanSettings,
    pub placement: PlacementOptions,
    /// Candidate platform orientations for task placement (radians).
    pub candidate_gammas: Vec<f64>,
    /// Pinned task-circle center; None lets placement choose.
    pub center: Option<Vec2>,
    /// Pinned path orientation; None lets placement choose.
    pub gamma: Option<f64>,
    pub solver: SolverOptions,
    pub modes: Vec<BalancingMode>,
    pub cam: CamConfig,
    pub output: OutputConfig,
    /// SHA-256 of the source text, hex; pure function of the config content.
    pub sha256: String,
}

impl StudyConfig {
    pub fn wide_default() -> Self {
        Self::defaults("wl_default", RobotGeometry::wide_default())
    }

    pub fn narrow_default() -> Self {
        let mut cfg = Self::defaults("nl_default", RobotGeometry::narrow_default());
        cfg.scan = ScanSettings::for_layout(LayoutTag::Narrow);
        // One leg's torque at the narrow layout's cam-friendly placements
        // swings wider than the default shaft allows (the wire moment arm is
        // bounded to 0.95 a / 1.05 r), so this study uses a thinner shaft.
        cfg.cam.r = 0.02;
        cfg
    }

    fn defaults(label: &str, geometry: RobotGeometry) -> Self {
        let scan = ScanSettings::for_layout(geometry.layout);
        Self {
            label: label.to_string(),
            geometry,
            mass: MassModel::default_study(),
            task: TaskSpec::default(),
            scan,
            placement: PlacementOptions::default(),
            candidate_gammas: (-3..=3).map(|g| g as f64 * 10.0 * DEG).collect(),
            center: None,
            gamma: None,
            solver: SolverOptions::default(),
            modes: vec![
                BalancingMode::Mode1,
                BalancingMode::Mode2,
                BalancingMode::Mode3,
            ],
            cam: CamConfig::default(),
            output: OutputConfig::default(),
            sha256: hex_sha256(b""),
        }
    }

    /// Parse and validate config text. `strict` additionally requires the
    /// `[geometry]` and `[mass]` sections and rejects unknown keys/sections.
    pub fn from_text(text: &str, strict: bool) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::parse(text)?;

        if strict {
            for required in ["geometry", "mass"] {
                if !raw.has_section(required) {
                    return Err(ConfigError::MissingSection(required.into()));
                }
            }
        }

        // [geometry]
        let sec = "geometry";
        let layout = match raw.take(sec, "layout") {
            None => LayoutTag::Wide,
            Some((v, line)) => match v.trim().to_ascii_lowercase().as_str() {
                "wide" | "wl" => LayoutTag::Wide,
                "narrow" | "nl" => LayoutTag::Narrow,
                other => {
                    return Err(value_err(
                        sec,
                        "layout",
                        line,
                        format!("'{other}' is not 'wide' or 'narrow'"),
                    ))
                }
            },
        };
        let mut geometry = match layout {
            LayoutTag::Wide => RobotGeometry::wide_default(),
            LayoutTag::Narrow => RobotGeometry::narrow_default(),
        };
        if let Some((v, line)) = raw.take(sec, "base") {
            let vals = parse_floats(sec, "base", &v, line)?;
            if vals.len() != 6 {
                return Err(value_err(sec, "base", line, "expected 6 numbers (x y x y x y)"));
            }
            for i in 0..3 {
                geometry.base[i] = Vec2::new(vals[2 * i], vals[2 * i + 1]);
            }
        }
        if let Some((v, line)) = raw.take(sec, "anchor") {
            let vals = parse_floats(sec, "anchor", &v, line)?;
            if vals.len() != 6 {
                return Err(value_err(sec, "anchor", line, "expected 6 numbers (x y x y x y)"));
            }
            for i in 0..3 {
                geometry.platform_anchor[i] = Vec2::new(vals[2 * i], vals[2 * i + 1]);
            }
        }
        geometry.l1 = take_f64(&mut raw, sec, "l1", geometry.l1)?;
        geometry.l2 = take_f64(&mut raw, sec, "l2", geometry.l2)?;
        geometry.validate().map_err(ConfigError::Invalid)?;

        // [mass]
        let sec = "mass";
        let mut mass = MassModel::default_study();
        mass.proximal = take_triple(&mut raw, sec, "proximal", mass.proximal)?;
        mass.distal = take_triple(&mut raw, sec, "distal", mass.distal)?;
        mass.platform = take_f64(&mut raw, sec, "platform", mass.platform)?;
        if let Some((v, line)) = raw.take(sec, "com_fraction") {
            let vals = parse_floats(sec, "com_fraction", &v, line)?;
            mass.com_fraction = match vals.len() {
                1 => [vals[0]; 2],
                2 => [vals[0], vals[1]],
                n => {
                    return Err(value_err(
                        sec,
                        "com_fraction",
                        line,
                        format!("expected 1 or 2 numbers, got {n}"),
                    ))
                }
            };
        }
        mass.gravity = take_f64(&mut raw, sec, "gravity", mass.gravity)?;
        if let Some((v, line)) = raw.take(sec, "gravity_dir") {
            let vals = parse_floats(sec, "gravity_dir", &v, line)?;
            if vals.len() != 2 {
                return Err(value_err(sec, "gravity_dir", line, "expected 2 numbers"));
            }
            mass.gravity_dir = Vec2::new(vals[0], vals[1]);
        }
        mass.validate().map_err(ConfigError::Invalid)?;

        // [task]
        let sec = "task";
        let mut task = TaskSpec::default();
        task.task_radius = take_f64(&mut raw, sec, "radius", task.task_radius)?;
        task.orientation_range =
            take_f64(&mut raw, sec, "orientation_range_deg", task.orientation_range / DEG)? * DEG;
        task.spiral_points = take_usize(&mut raw, sec, "spiral_points", task.spiral_points)?;
        task.spiral_turns = take_f64(&mut raw, sec, "spiral_turns", task.spiral_turns)?;
        let center = match raw.take(sec, "center") {
            None => None,
            Some((v, line)) => {
                if v.trim().eq_ignore_ascii_case("auto") {
                    None
                } else {
                    let vals = parse_floats(sec, "center", &v, line)?;
                    if vals.len() != 2 {
                        return Err(value_err(sec, "center", line, "expected 'auto' or 2 numbers"));
                    }
                    Some(Vec2::new(vals[0], vals[1]))
                }
            }
        };
        let gamma = match raw.take(sec, "gamma_deg") {
            None => None,
            Some((v, line)) => {
                if v.trim().eq_ignore_ascii_case("auto") {
                    None
                } else {
                    let vals = parse_floats(sec, "gamma_deg", &v, line)?;
                    if vals.len() != 1 {
                        return Err(value_err(sec, "gamma_deg", line, "expected 'auto' or 1 number"));
                    }
                    Some(vals[0] * DEG)
                }
            }
        };
        task.validate().map_err(ConfigError::Invalid)?;

        // [workspace]
        let sec = "workspace";
        let mut scan = ScanSettings::for_layout(layout);
        scan.angular_resolution =
            take_f64(&mut raw, sec, "angular_resolution_deg", scan.angular_resolution / DEG)? * DEG;
        scan.orientation_resolution = take_f64(
            &mut raw,
            sec,
            "orientation_resolution_deg",
            scan.orientation_resolution / DEG,
        )? * DEG;
        scan.radial_tolerance =
            take_f64(&mut raw, sec, "radial_tolerance", scan.radial_tolerance)?;
        scan.validate().map_err(ConfigError::Invalid)?;

        // [placement]
        let sec = "placement";
        let mut placement = PlacementOptions::default();
        placement.azimuth_stride =
            take_usize(&mut raw, sec, "azimuth_stride", placement.azimuth_stride)?;
        placement.radial_samples =
            take_usize(&mut raw, sec, "radial_samples", placement.radial_samples)?;
        placement.eval_points = take_usize(&mut raw, sec, "eval_points", placement.eval_points)?;
        placement.eval_starts = take_usize(&mut raw, sec, "eval_starts", placement.eval_starts)?;
        if let Some((v, line)) = raw.take(sec, "seed") {
            placement.seed = v
                .trim()
                .parse::<u64>()
                .map_err(|_| value_err(sec, "seed", line, "expected an unsigned integer"))?;
        }
        let candidate_gammas: Vec<f64> = match raw.take(sec, "candidate_gammas_deg") {
            None => (-3..=3).map(|g| g as f64 * 10.0 * DEG).collect(),
            Some((v, line)) => {
                let vals = parse_floats(sec, "candidate_gammas_deg", &v, line)?;
                if vals.is_empty() {
                    return Err(value_err(
                        sec,
                        "candidate_gammas_deg",
                        line,
                        "expected at least one angle",
                    ));
                }
                vals.into_iter().map(|d| d * DEG).collect()
            }
        };

        // [solver]
        let sec = "solver";
        let mut solver = SolverOptions::default();
        solver.max_iters = take_usize(&mut raw, sec, "max_iters", solver.max_iters)?;
        solver.starts = take_usize(&mut raw, sec, "starts", solver.starts)?;
        solver.k_max = take_f64(&mut raw, sec, "k_max", solver.k_max)?;
        if let Some((v, line)) = raw.take(sec, "seed") {
            solver.seed = v
                .trim()
                .parse::<u64>()
                .map_err(|_| value_err(sec, "seed", line, "expected an unsigned integer"))?;
        }
        let modes = match raw.take(sec, "modes") {
            None => vec![
                BalancingMode::Mode1,
                BalancingMode::Mode2,
                BalancingMode::Mode3,
            ],
            Some((v, line)) => {
                let mut modes = Vec::new();
                for tok in v.split_whitespace() {
                    let mode = match tok {
                        "1" => BalancingMode::Mode1,
                        "2" => BalancingMode::Mode2,
                        "3" => BalancingMode::Mode3,
                        other => {
                            return Err(value_err(
                                sec,
                                "modes",
                                line,
                                format!("'{other}' is not a balancing mode (1, 2 or 3)"),
                            ))
                        }
                    };
                    if !modes.contains(&mode) {
                        modes.push(mode);
                    }
                }
                if modes.is_empty() {
                    return Err(value_err(sec, "modes", line, "expected at least one mode"));
                }
                modes
            }
        };

        // [cam]
        let sec = "cam";
        let mut cam = CamConfig::default();
        cam.enabled = take_bool(&mut raw, sec, "enabled", cam.enabled)?;
        cam.case = match raw.take(sec, "case") {
            None => None,
            Some((v, line)) => {
                if v.trim().eq_ignore_ascii_case("auto") {
                    None
                } else {
                    let idx = v
                        .trim()
                        .parse::<u8>()
                        .ok()
                        .and_then(WireCase::from_index)
                        .ok_or_else(|| {
                            value_err(sec, "case", line, "expected 'auto' or a case number 1-4")
                        })?;
                    if matches!(idx, WireCase::Three | WireCase::Four) {
                        return Err(value_err(
                            sec,
                            "case",
                            line,
                            "internal-tangent cases (3, 4) are not synthesizable; use 1, 2 or auto",
                        ));
                    }
                    Some(idx)
                }
            }
        };
        cam.a = take_f64(&mut raw, sec, "a", cam.a)?;
        cam.r = take_f64(&mut raw, sec, "r", cam.r)?;
        cam.u_t = take_auto_triple(&mut raw, sec, "u_t")?;
        cam.k = take_auto_triple(&mut raw, sec, "k")?;
        cam.q0 = take_auto_triple(&mut raw, sec, "q0")?;
        cam.samples = take_usize(&mut raw, sec, "samples", cam.samples)?;
        cam.fit_order = take_usize(&mut raw, sec, "fit_order", cam.fit_order)?;
        cam.range_margin = take_f64(&mut raw, sec, "range_margin", cam.range_margin)?;
        if cam.samples < 16 {
            return Err(ConfigError::Invalid(format!(
                "[cam] samples = {} must be >= 16",
                cam.samples
            )));
        }
        if cam.fit_order == 0 || cam.fit_order > 8 {
            return Err(ConfigError::Invalid(format!(
                "[cam] fit_order = {} must be in 1..=8",
                cam.fit_order
            )));
        }
        if !(cam.range_margin >= 0.0 && cam.range_margin < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "[cam] range_margin = {} must be in [0, 1)",
                cam.range_margin
            )));
        }

        // [output]
        let sec = "output";
        let mut output = OutputConfig::default();
        output.svg = take_bool(&mut raw, sec, "svg", output.svg)?;
        output.contour_azimuth = take_f64(
            &mut raw,
            sec,
            "contour_azimuth_deg",
            output.contour_azimuth / DEG,
        )? * DEG;
        output.contour_radial =
            take_usize(&mut raw, sec, "contour_radial", output.contour_radial)?;
        if !(output.contour_azimuth > 0.0 && output.contour_azimuth <= PI) {
            return Err(ConfigError::Invalid(format!(
                "[output] contour_azimuth_deg = {} must be in (0, 180]",
                output.contour_azimuth / DEG
            )));
        }
        if output.contour_radial < 2 {
            return Err(ConfigError::Invalid(
                "[output] contour_radial must be >= 2".into(),
            ));
        }

        // [study]
        let sec = "study";
        let label = match raw.take(sec, "label") {
            Some((v, _)) => v,
            None => match layout {
                LayoutTag::Wide => "wl".to_string(),
                LayoutTag::Narrow => "nl".to_string(),
            },
        };

        if strict {
            let known = [
                "geometry",
                "mass",
                "task",
                "workspace",
                "placement",
                "solver",
                "cam",
                "output",
                "study",
            ];
            if let Some(err) = raw.first_unused(&known) {
                return Err(err);
            }
        }

        Ok(Self {
            label,
            geometry,
            mass,
            task,
            scan,
            placement,
            candidate_gammas,
            center,
            gamma,
            solver,
            modes,
            cam,
            output,
            sha256: hex_sha256(text.as_bytes()),
        })
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
