//! Design-study toolkit for gravity balancing of planar 3RRR parallel robots.
//!
//! The pipeline goes kinematics -> static torques -> workspace selection ->
//! balancing-element optimization -> performance report:
//!
//! * [`kinematics`] — closed-form leg IK and the Jacobian stack relating
//!   platform twist, active joints and elbow joints.
//! * [`statics`] — gravitational and elastic potentials and the actuator
//!   torque needed to hold a pose under an external wrench.
//! * [`workspace`] — dexterous-workspace scans over an orientation sweep,
//!   task-disk erosion, spiral task paths and optimal task placement.
//! * [`spring_opt`] — torsional-spring parameter optimization (damped least
//!   squares with bounds and deterministic multi-start) and the per-leg
//!   torque-ratio metric `e_tau`.
//! * [`wirecam`] — wire-wrapped cam mechanisms: tangency geometry, wire
//!   length, forward torque, and profile synthesis from a desired torque law.
//! * [`config`], [`report`], [`study`] — the study driver: plain-text config,
//!   deterministic CSV/SVG artifacts, and the end-to-end `run_study`.
//!
//! All floating-point work is `f64`. Angles are radians; the platform
//! orientation and all joint angles are normalized to `(-pi, pi]`.

pub mod config;
pub mod kinematics;
pub mod numeric;
pub mod report;
pub mod spring_opt;
pub mod statics;
pub mod study;
pub mod wirecam;
pub mod workspace;

pub use config::{ConfigError, StudyConfig};
pub use kinematics::{
    inverse_kinematics, jacobians, ElbowBranch, JacobianBundle, JointConfig, KinematicsError,
    LayoutTag, Pose, RobotGeometry,
};
pub use report::{ReportBundle, ReportError, Table};
pub use statics::{MassModel, SpringSet, Wrench};
pub use study::{run_study, run_study_stage, Stage, StudyError, StudyOutcome};
