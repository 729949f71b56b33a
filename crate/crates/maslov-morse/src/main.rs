//! `maslov-morse` — count negative eigenvalues of −y″ + V(x)y on [0,1]
//! under separated self-adjoint boundary conditions, by spectral flow plus
//! two boundary matrix counts, cross-checked by a finite-element
//! discretization.

mod config;
mod expr;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use maslov_core::fem::CurveConvention;
use maslov_core::morse::{MorseError, Settings};
use maslov_core::problems;

#[derive(Debug)]
pub enum CliError {
    Syntax(String),
    Validation(String),
    Io(String),
    Compute(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Syntax(_) => "syntax",
            CliError::Validation(_) => "validation",
            CliError::Io(_) => "io",
            CliError::Compute(_) => "compute",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Syntax(m)
            | CliError::Validation(m)
            | CliError::Io(m)
            | CliError::Compute(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<MorseError> for CliError {
    fn from(e: MorseError) -> Self {
        match &e {
            MorseError::Boundary(_) | MorseError::Shooting(_) | MorseError::EmptyBottomShelf => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Compute(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "maslov-morse",
    version,
    about = "Negative-eigenvalue counts for matrix Schrödinger operators on [0,1]"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute and print the full count report as JSON.
    Report(CommonArgs),
    /// Write eigenvalue-curve and phase-gap CSV tables.
    Curves(CommonArgs),
    /// Run every internal consistency check and print a pass/fail table.
    Check(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a JSON problem configuration (or example1..example4).
    #[arg(long, conflicts_with = "example")]
    config: Option<String>,
    /// Built-in reference problem number (1-4).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    example: Option<u8>,
    /// Bottom-shelf height override.
    #[arg(long)]
    s0: Option<f64>,
    /// Left-edge depth override.
    #[arg(long = "lambda-inf")]
    lambda_inf: Option<f64>,
    /// Runge-Kutta steps per unit length.
    #[arg(long)]
    steps: Option<usize>,
    /// Finite-element mesh intervals.
    #[arg(long)]
    mesh: Option<usize>,
    /// Initial samples per path segment.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory for report/CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn build_problem(
    args: &CommonArgs,
) -> Result<(Option<config::Config>, maslov_core::Problem), CliError> {
    let settings = Settings::default();
    let (cfg, mut problem) = match (&args.config, args.example) {
        (Some(path), None) => config::load_config(path, settings)?,
        (None, Some(k)) => (None, problems::builtin(k as usize, settings)?),
        _ => {
            return Err(CliError::Validation(
                "exactly one of --config or --example is required".into(),
            ))
        }
    };
    // Command-line flags override the configuration file.
    if let Some(s0) = args.s0 {
        problem.settings.s0 = s0;
    }
    if let Some(li) = args.lambda_inf {
        problem.settings.lambda_inf = Some(li);
    }
    if let Some(steps) = args.steps {
        problem.settings.steps_per_unit = steps;
    }
    if let Some(mesh) = args.mesh {
        problem.settings.mesh_n = mesh;
    }
    if let Some(samples) = args.samples {
        problem.settings.segment_samples = samples;
    }
    Ok((cfg, problem))
}

fn curve_options(cfg: &Option<config::Config>) -> runs::CurveOptions {
    let mut opts = runs::CurveOptions::default();
    if let Some(cfg) = cfg {
        if let Some(k) = cfg.curve_k {
            opts.k = k;
        }
        if let Some(points) = cfg.curve_points {
            opts.points = points;
        }
        if let Some(conv) = &cfg.convention {
            opts.convention = if conv == "H(s)" {
                CurveConvention::Squeezed
            } else {
                CurveConvention::PerUnitLength
            };
        }
    }
    opts
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Report(args) => {
            let (_, problem) = build_problem(&args)?;
            runs::run_report(&problem, &args.out)
        }
        Command::Curves(args) => {
            let (cfg, problem) = build_problem(&args)?;
            runs::run_curves(&problem, &curve_options(&cfg), &args.out)
        }
        Command::Check(args) => {
            let (_, problem) = build_problem(&args)?;
            runs::run_check(&problem)
        }
    }
}

fn main() -> ExitCode {
    // Argument errors share the JSON error channel and exit code 1; code 2
    // is reserved for degeneracy warnings on otherwise successful runs.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::from(0);
        }
        Err(e) => {
            let doc = serde_json::json!({
                "error": e.to_string(),
                "kind": "usage",
            });
            eprintln!("{doc}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            let doc = serde_json::json!({
                "error": err.message(),
                "kind": err.kind(),
            });
            eprintln!("{doc}");
            ExitCode::from(1)
        }
    }
}
