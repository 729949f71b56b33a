//! JSON problem configuration.
//!
//! Schema: `{"n": int, "potential": [[string, ...], ...], "alpha1": [[num]],
//! "alpha2": [[num]], "beta1": [[num]], "beta2": [[num]]}` plus optional
//! numeric overrides (`s0`, `lambdaInf`, `steps`, `meshN`, `samples`,
//! `curveK`, `curvePoints`, `convention`). The names `example1`..`example4`
//! stand for the built-in reference problems.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use maslov_core::morse::{Problem, Settings};
use maslov_core::problems;
use maslov_core::shooting::Potential;
use maslov_core::RealMatrix;

use crate::expr::{parse_expression, Expr};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub n: usize,
    pub potential: Vec<Vec<String>>,
    pub alpha1: RealMatrix,
    pub alpha2: RealMatrix,
    pub beta1: RealMatrix,
    pub beta2: RealMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, rename = "lambdaInf", skip_serializing_if = "Option::is_none")]
    pub lambda_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, rename = "meshN", skip_serializing_if = "Option::is_none")]
    pub mesh_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, rename = "curveK", skip_serializing_if = "Option::is_none")]
    pub curve_k: Option<usize>,
    #[serde(
        default,
        rename = "curvePoints",
        skip_serializing_if = "Option::is_none"
    )]
    pub curve_points: Option<usize>,
    /// "H(s)" for the squeezed eigenvalues, "H_s" to divide by s².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

impl Config {
    pub fn apply_to_settings(&self, settings: &mut Settings) {
        if let Some(s0) = self.s0 {
            settings.s0 = s0;
        }
        if let Some(li) = self.lambda_inf {
            settings.lambda_inf = Some(li);
        }
        if let Some(steps) = self.steps {
            settings.steps_per_unit = steps;
        }
        if let Some(mesh) = self.mesh_n {
            settings.mesh_n = mesh;
        }
        if let Some(samples) = self.samples {
            settings.segment_samples = samples;
        }
    }
}

/// Builds the potential from the parsed expression grid. Symmetry of the
/// values is checked later by problem validation; here only the shape and
/// parsability matter.
fn potential_from_expressions(n: usize, grid: &[Vec<String>]) -> Result<Potential, CliError> {
    if grid.len() != n || grid.iter().any(|row| row.len() != n) {
        return Err(CliError::Validation(format!(
            "potential must be a {n}x{n} grid of expressions"
        )));
    }
    let mut parsed: Vec<Expr> = Vec::with_capacity(n * n);
    for (i, row) in grid.iter().enumerate() {
        for (j, src) in row.iter().enumerate() {
            let expr = parse_expression(src)
                .map_err(|e| CliError::Syntax(format!("potential[{i}][{j}] \"{src}\": {e}")))?;
            parsed.push(expr);
        }
    }
    let parsed = Arc::new(parsed);
    Ok(Potential::memoized(n, move |x| {
        let mut v = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                v[(i, j)] = parsed[i * n + j].eval(x);
            }
        }
        v
    }))
}

/// Turns a configuration into a validated problem, with CLI overrides
/// already applied to `settings`.
pub fn config_to_problem(cfg: &Config, settings: Settings) -> Result<Problem, CliError> {
    let potential = potential_from_expressions(cfg.n, &cfg.potential)?;
    for (name, m) in [
        ("alpha1", &cfg.alpha1),
        ("alpha2", &cfg.alpha2),
        ("beta1", &cfg.beta1),
        ("beta2", &cfg.beta2),
    ] {
        if m.rows() != cfg.n || m.cols() != cfg.n {
            return Err(CliError::Validation(format!(
                "{name} must be {0}x{0}",
                cfg.n
            )));
        }
    }
    Problem::new(
        potential,
        (cfg.alpha1.clone(), cfg.alpha2.clone()),
        (cfg.beta1.clone(), cfg.beta2.clone()),
        settings,
    )
    .map_err(CliError::from)
}

/// Loads a configuration file; the literal names `example1`..`example4`
/// resolve to the built-in problems instead of the filesystem.
pub fn load_config(
    path: &str,
    mut settings: Settings,
) -> Result<(Option<Config>, Problem), CliError> {
    if let Some(k) = builtin_index(path) {
        let problem = problems::builtin(k, settings).map_err(CliError::from)?;
        return Ok((None, problem));
    }
    let text = std::fs::read_to_string(Path::new(path))
        .map_err(|e| CliError::Io(format!("cannot read {path}: {e}")))?;
    let cfg: Config =
        serde_json::from_str(&text).map_err(|e| CliError::Syntax(format!("{path}: {e}")))?;
    cfg.apply_to_settings(&mut settings);
    let problem = config_to_problem(&cfg, settings)?;
    Ok((Some(cfg), problem))
}

fn builtin_index(name: &str) -> Option<usize> {
    match name {
        "example1" => Some(1),
        "example2" => Some(2),
        "example3" => Some(3),
        "example4" => Some(4),
        _ => None,
    }
}
