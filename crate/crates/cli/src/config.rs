//! JSON run configuration: top-level keys `problem`, `scheme`, `sweep`,
//! `output`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use splitlab_core::dust::{make_column_dust_problem, make_scalar_dust_problem, ColumnDustParams,
                          ScalarDustParams};
use splitlab_core::ode::{ProblemSpec, ProcessModel, Tolerances};
use splitlab_core::scheme::{builtin_scheme, parse_scheme, BuiltinKind, IntegratorKind, SchemeSpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// Builtin scheme name or path to a scheme file. `compare` ignores it.
    #[serde(default)]
    pub scheme: Option<String>,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Two uncoupled exponentials `A = alpha*q`, `B = beta*q`.
    Linear {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_one")]
        q_ic: f64,
    },
    DustScalar {
        #[serde(default)]
        emission: Option<f64>,
        #[serde(default)]
        removal_rate: Option<f64>,
        #[serde(default)]
        mixing_rate: Option<f64>,
        #[serde(default)]
        background: Option<f64>,
        #[serde(default)]
        q_ic: Option<f64>,
    },
    DustColumn {
        #[serde(default)]
        layers: Option<usize>,
        #[serde(default)]
        dz: Option<f64>,
        #[serde(default)]
        emission_flux: Option<f64>,
        #[serde(default)]
        deposition_velocity: Option<f64>,
        #[serde(default)]
        diffusivity: Option<f64>,
        #[serde(default)]
        q_ic: Option<f64>,
    },
}

fn default_alpha() -> f64 {
    -1.0
}
fn default_beta() -> f64 {
    -2.0
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub t_n: f64,
    pub dts: Vec<f64>,
    #[serde(default)]
    pub tol_rel: Option<f64>,
    #[serde(default)]
    pub tol_abs: Option<f64>,
    /// One of `exact`, `forward-euler`, `backward-euler`.
    #[serde(default)]
    pub integrator: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<String>,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        match self {
            ProblemConfig::Linear { alpha, beta, q_ic } => {
                let (a, b) = (*alpha, *beta);
                let processes = vec![
                    ProcessModel::scalar_with_jacobian("A", move |q| a * q, move |_| a),
                    ProcessModel::scalar_with_jacobian("B", move |q| b * q, move |_| b),
                ];
                Ok(ProblemSpec::new(processes, 1, vec![*q_ic])?)
            }
            ProblemConfig::DustScalar {
                emission,
                removal_rate,
                mixing_rate,
                background,
                q_ic,
            } => {
                let mut p = ScalarDustParams::default();
                set(&mut p.emission, emission);
                set(&mut p.removal_rate, removal_rate);
                set(&mut p.mixing_rate, mixing_rate);
                set(&mut p.background, background);
                set(&mut p.q_ic, q_ic);
                Ok(make_scalar_dust_problem(p)?)
            }
            ProblemConfig::DustColumn {
                layers,
                dz,
                emission_flux,
                deposition_velocity,
                diffusivity,
                q_ic,
            } => {
                let mut p = ColumnDustParams::default();
                set(&mut p.layers, layers);
                set(&mut p.dz, dz);
                set(&mut p.emission_flux, emission_flux);
                set(&mut p.deposition_velocity, deposition_velocity);
                set(&mut p.diffusivity, diffusivity);
                set(&mut p.q_ic, q_ic);
                Ok(make_column_dust_problem(p)?)
            }
        }
    }

    /// Process names of the built problem, used to instantiate builtins.
    pub fn process_names(&self) -> Vec<&'static str> {
        match self {
            ProblemConfig::Linear { .. } => vec!["A", "B"],
            _ => vec!["A", "B", "C"],
        }
    }
}

fn set<T: Copy>(slot: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *slot = *v;
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    if cfg.sweep.dts.is_empty() {
        bail!("config error: sweep.dts must not be empty");
    }
    if cfg.sweep.dts.windows(2).any(|w| w[1] >= w[0]) {
        bail!("config error: sweep.dts must be strictly decreasing");
    }
    Ok(cfg)
}

/// Resolves a scheme argument: a builtin name, or a path to a DSL file.
pub fn load_scheme(source: &str, processes: &[&str]) -> Result<SchemeSpec> {
    if let Some(kind) = BuiltinKind::parse_name(source) {
        return Ok(builtin_scheme(kind, processes)?);
    }
    let path = Path::new(source);
    if !path.exists() {
        bail!("`{source}` is neither a builtin scheme nor an existing file");
    }
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read scheme file {}", path.display()))?;
    Ok(parse_scheme(&text)?)
}

pub fn parse_integrator(name: &str, tol: Tolerances) -> Result<IntegratorKind> {
    match name {
        "exact" => Ok(IntegratorKind::Exact(tol)),
        "forward-euler" => Ok(IntegratorKind::ForwardEuler),
        "backward-euler" => Ok(IntegratorKind::BackwardEuler),
        other => bail!("unknown integrator `{other}` (expected exact, forward-euler, or backward-euler)"),
    }
}
