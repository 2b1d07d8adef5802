//! `ppwave` command-line front end.
//!
//! Exit codes: 0 all checks pass, 2 config/validation error, 3 check failure,
//! 4 internal error.

mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ppwave::ModelConfig;
use serde_json::Value;

use commands::{Options, RunError};
use report::{RunReport, Status};

#[derive(Parser, Debug)]
#[command(name = "ppwave", version, about = "Verification suites for periodic pp-wave models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Model checks
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Curvature checks
    Curvature {
        #[command(subcommand)]
        action: CurvatureAction,
    },
    /// Geodesic completeness
    Geodesic {
        #[command(subcommand)]
        action: GeodesicAction,
    },
    /// Killing field checks
    Killing {
        #[command(subcommand)]
        action: KillingAction,
    },
    /// Isometry group checks
    Group {
        #[command(subcommand)]
        action: GroupAction,
    },
    /// Holonomy transports
    Holonomy {
        #[command(subcommand)]
        action: HolonomyAction,
    },
    /// Isometry algebra dimensions
    Dims(Common),
    /// Every suite
    All(Common),
}

#[derive(Subcommand, Debug)]
enum ModelAction {
    /// Parse, validate and sanity-check the model
    Validate(Common),
}

#[derive(Subcommand, Debug)]
enum CurvatureAction {
    /// Symmetries, parallel Weyl tensor, non-parallel Riemann tensor
    Verify(Common),
}

#[derive(Subcommand, Debug)]
enum GeodesicAction {
    /// Integrate random geodesics to the horizon
    Probe(Common),
}

#[derive(Subcommand, Debug)]
enum KillingAction {
    /// Killing residuals and bracket relations
    Verify(Common),
}

#[derive(Subcommand, Debug)]
enum GroupAction {
    /// Group law sweeps and lattice validation
    Verify(Common),
}

#[derive(Subcommand, Debug)]
enum HolonomyAction {
    /// Transports of generators and of contractible loops
    Compute(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model config (JSON)
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample, trial or sweep count (command-specific default)
    #[arg(long)]
    trials: Option<usize>,
    /// Geodesic horizon |tau|
    #[arg(long)]
    horizon: Option<f64>,
    /// Replaces the default tolerance of every upper-bound check
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the command's numeric table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Command {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Command::Model { action: ModelAction::Validate(c) } => ("model validate", c),
            Command::Curvature { action: CurvatureAction::Verify(c) } => ("curvature verify", c),
            Command::Geodesic { action: GeodesicAction::Probe(c) } => ("geodesic probe", c),
            Command::Killing { action: KillingAction::Verify(c) } => ("killing verify", c),
            Command::Group { action: GroupAction::Verify(c) } => ("group verify", c),
            Command::Holonomy { action: HolonomyAction::Compute(c) } => ("holonomy compute", c),
            Command::Dims(c) => ("dims", c),
            Command::All(c) => ("all", c),
        }
    }
}

enum Failure {
    Config(String),
    Internal(String),
}

fn load(path: &Path) -> Result<(Value, ModelConfig), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("/: invalid JSON: {e}")))?;
    let config = ModelConfig::from_value(&value).map_err(|e| Failure::Config(e.to_string()))?;
    Ok((value, config))
}

fn execute(name: &str, common: &Common) -> Result<RunReport, Failure> {
    let (value, config) = load(&common.config)?;
    let model = config.build::<f64>().map_err(|e| Failure::Config(e.to_string()))?;
    let opts = Options { seed: common.seed, trials: common.trials, horizon: common.horizon, tol: common.tol };
    if let Some(t) = opts.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Failure::Config(format!("--tol must be a finite non-negative number, got {t}")));
        }
    }
    let section = match name {
        "model validate" => commands::model_validate(&model, &opts),
        "curvature verify" => commands::curvature_verify(&model, &opts),
        "geodesic probe" => commands::geodesic_probe(&model, &opts),
        "killing verify" => commands::killing_verify(&model, &opts),
        "group verify" => commands::group_verify(&model, &config, &opts),
        "holonomy compute" => commands::holonomy_compute(&model, &config, &opts),
        "dims" => commands::dims(&model, &opts),
        _ => commands::all(&model, &config, &opts),
    }
    .map_err(|e| match e {
        RunError::Config(m) => Failure::Config(m),
        RunError::Internal(m) => Failure::Internal(m),
    })?;
    if let (Some(path), Some(table)) = (&common.csv, &section.table) {
        table.write(path).map_err(|e| Failure::Internal(format!("writing {}: {e}", path.display())))?;
    }
    Ok(RunReport::new(name, report::fingerprint(&value), common.seed, section))
}

fn emit(report: &RunReport, out: Option<&Path>) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.split();
    let start = Instant::now();
    let result = execute(name, common);
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok(report) => {
            if let Err(e) = emit(&report, common.out.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(4);
            }
            let failed = report.checks.iter().filter(|c| c.status == Status::Fail).count();
            eprintln!("{name}: {} checks, {failed} failed, wall time {elapsed:.3}s", report.checks.len());
            if report.status == Status::Pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(4)
        }
    }
}
