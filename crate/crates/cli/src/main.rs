//! Command-line driver for the gravity-balancing design toolkit.
//!
//! Each verb runs the study pipeline up to a stage and prints the study
//! summary to stdout. Artifacts (CSV tables, optional SVG, manifest) are
//! written when `--out` is given; `run` always writes, defaulting to
//! `out/<label>`. Exit codes: 0 success, 2 configuration error, 3 numeric
//! or I/O failure during the study.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rrr_balance::{run_study_stage, Stage, StudyConfig};

#[derive(Parser)]
#[command(
    name = "rrr-balance",
    version,
    about = "Gravity-balancing design studies for planar 3RRR parallel robots",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct CommonOpts {
    /// Study configuration file (plain-text sections of key = value lines)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory for the artifact bundle; created if missing
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cap for data-parallel worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Require all config sections and reject unknown keys
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Scan the dexterous workspace and erode it to the task sub-workspace
    Workspace(CommonOpts),
    /// Workspace scan plus optimal task placement
    Place(CommonOpts),
    /// Placement plus torsional-spring optimization for the configured modes
    Optimize(CommonOpts),
    /// Spring optimization plus wire-wrapped cam design
    Cam(CommonOpts),
    /// Full pipeline; prints the study summary
    Report(CommonOpts),
    /// Full pipeline; always writes the artifact bundle (default out/<label>)
    Run(CommonOpts),
}

impl Verb {
    fn stage(&self) -> Stage {
        match self {
            Verb::Workspace(_) => Stage::Workspace,
            Verb::Place(_) => Stage::Place,
            Verb::Optimize(_) => Stage::Optimize,
            Verb::Cam(_) => Stage::Cam,
            Verb::Report(_) | Verb::Run(_) => Stage::Full,
        }
    }

    fn opts(&self) -> &CommonOpts {
        match self {
            Verb::Workspace(o)
            | Verb::Place(o)
            | Verb::Optimize(o)
            | Verb::Cam(o)
            | Verb::Report(o)
            | Verb::Run(o) => o,
        }
    }
}

/// Failure classes mapped to process exit codes.
enum Failure {
    /// Unreadable or invalid configuration: exit 2.
    Config(String),
    /// Study or output failure after a valid configuration: exit 3.
    Runtime(String),
}

impl Failure {
    fn code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Runtime(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let opts = cli.verb.opts();

    if let Some(n) = opts.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }

    let text = fs::read_to_string(&opts.config).map_err(|e| {
        Failure::Config(format!("cannot read config {}: {e}", opts.config.display()))
    })?;
    let cfg = StudyConfig::from_text(&text, opts.strict)
        .map_err(|e| Failure::Config(format!("config {}: {e}", opts.config.display())))?;

    let outcome = run_study_stage(&cfg, cli.verb.stage())
        .map_err(|e| Failure::Runtime(format!("study {}: {e}", cfg.label)))?;
    print!("{}", outcome.summary);

    let out_dir = match (&cli.verb, &opts.out) {
        (_, Some(dir)) => Some(dir.clone()),
        (Verb::Run(_), None) => Some(PathBuf::from("out").join(&cfg.label)),
        _ => None,
    };
    if let Some(dir) = out_dir {
        let written = outcome
            .bundle
            .write_all(&dir)
            .map_err(|e| Failure::Runtime(format!("writing {}: {e}", dir.display())))?;
        eprintln!("wrote {} files to {}", written.len(), dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.code()
        }
    }
}
