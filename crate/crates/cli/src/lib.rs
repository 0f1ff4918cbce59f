//! Command implementations behind the `splitlab` binary: coefficient
//! prediction, LTE sweeps, and original/revised coupling comparison.

pub mod config;
pub mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use splitlab_core::analysis::{fit_order, lte_with_attribution_using, predict_leading_coefficients,
                              predict_leading_lte, state_at, OrderFit};
use splitlab_core::ode::{ProblemSpec, Tolerances};
use splitlab_core::scheme::{validate_consistency, IntegratorKind, SchemeSpec};
use splitlab_core::Rational;

use config::{load_scheme, parse_integrator, OutputConfig, RunConfig};
use report::{sort_rows, ReportRow, TOTAL};

/// Command-line overrides that take precedence over the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub tol_rel: Option<f64>,
    pub tol_abs: Option<f64>,
    pub integrator: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Prints the `s[i<-j]` coefficient table for a scheme source (builtin
/// name or file path). With `processes`, the scheme is also checked for
/// consistency against a problem with those process names.
pub fn cmd_predict(source: &str, processes: Option<&[String]>) -> Result<String> {
    let default_names = ["A", "B", "C"];
    let builtin_names: Vec<&str> = match processes {
        Some(named) => named.iter().map(|s| s.as_str()).collect(),
        None => default_names.to_vec(),
    };
    let scheme = load_scheme(source, &builtin_names)?;
    if let Some(named) = processes {
        check_consistency_against(&scheme, named)?;
    }
    let table = predict_leading_coefficients(&scheme)?;

    let names = table.processes();
    let width = names.iter().map(|n| n.len()).max().unwrap_or(1).max(4);
    let mut out = String::new();
    writeln!(out, "scheme {}", scheme.name)?;
    write!(out, "{:>w$}", "", w = width + 2)?;
    for n in names {
        write!(out, "{n:>w$}", w = width + 2)?;
    }
    writeln!(out)?;
    for consumer in names {
        write!(out, "{consumer:>w$}", w = width + 2)?;
        for source in names {
            let cell = if consumer == source {
                ".".to_string()
            } else {
                match table.get(consumer, source) {
                    Some(c) if c > Rational::ZERO => format!("+{c}"),
                    Some(c) => format!("{c}"),
                    None => ".".to_string(),
                }
            };
            write!(out, "{cell:>w$}", w = width + 2)?;
        }
        writeln!(out)?;
    }
    if table.is_extrapolated() {
        writeln!(out, "note: fractional input coefficients use the extrapolated 2c-1 rule")?;
    }
    Ok(out)
}

/// Validates a scheme against a throwaway problem carrying the given
/// process names, so `predict` can report missing/duplicated processes.
fn check_consistency_against(scheme: &SchemeSpec, names: &[String]) -> Result<()> {
    let processes = names
        .iter()
        .map(|n| splitlab_core::ode::ProcessModel::scalar(n.clone(), |_| 0.0))
        .collect();
    let probe = ProblemSpec::new(processes, 1, vec![0.0])?;
    let violations = validate_consistency(scheme, &probe);
    if let Some(v) = violations.first() {
        return Err(splitlab_core::Error::InconsistentScheme(format!("{v}")).into());
    }
    Ok(())
}

pub struct SweepOutcome {
    pub rows: Vec<ReportRow>,
    pub summary: String,
    pub noise_floor: f64,
    pub total_fit: Option<OrderFit>,
}

/// Measures the LTE sweep described by a config and renders report rows
/// plus a plain-text slope summary.
pub fn run_sweep(cfg: &RunConfig, over: &Overrides) -> Result<SweepOutcome> {
    let problem = cfg.problem.build()?;
    let tol = tolerances(cfg, over);
    let integ = integrator(cfg, over, tol)?;
    let source = cfg
        .scheme
        .as_deref()
        .ok_or_else(|| anyhow!("config error: sweep requires a `scheme` entry"))?;
    let scheme = load_scheme(source, &cfg.problem.process_names())?;

    let q_n = state_at(&problem, cfg.sweep.t_n, tol)?;
    let noise_floor = 100.0 * (tol.abs + tol.rel * max_norm(&q_n));

    let mut rows = Vec::new();
    let mut total_norms = Vec::new();
    let mut residual_norms = Vec::new();
    let mut stage_norms: Vec<(String, Vec<f64>)> = scheme
        .stages()
        .iter()
        .map(|s| (s.process.clone(), Vec::new()))
        .collect();
    for &dt in &cfg.sweep.dts {
        let point = lte_with_attribution_using(&scheme, &problem, cfg.sweep.t_n, dt, tol, integ)
            .with_context(|| format!("sweep failed at dt={dt}"))?;
        let (pred_total, pred_per_process) =
            predict_leading_lte(&scheme, &problem, &point.q_n, dt)?;

        let measured = max_norm(&point.total);
        let residual = diff_norm(&point.total, &pred_total);
        rows.push(ReportRow {
            scheme: scheme.name.clone(),
            process: TOTAL.to_string(),
            dt,
            measured,
            predicted_leading: max_norm(&pred_total),
            residual,
            below_noise_floor: measured < noise_floor,
        });
        total_norms.push(measured);
        residual_norms.push(residual);

        for (stage, (process, norms)) in scheme.stages().iter().zip(&mut stage_norms) {
            let attr = &point.per_stage[&stage.id];
            let pred = pred_per_process
                .get(process.as_str())
                .cloned()
                .unwrap_or_else(|| vec![0.0; attr.len()]);
            let m = max_norm(attr);
            rows.push(ReportRow {
                scheme: scheme.name.clone(),
                process: process.clone(),
                dt,
                measured: m,
                predicted_leading: max_norm(&pred),
                residual: diff_norm(attr, &pred),
                below_noise_floor: m < noise_floor,
            });
            norms.push(m);
        }
    }
    sort_rows(&mut rows);

    let total_fit = fit_above_floor(&cfg.sweep.dts, &total_norms, noise_floor);
    let residual_fit = fit_above_floor(&cfg.sweep.dts, &residual_norms, noise_floor);

    let mut summary = String::new();
    writeln!(
        summary,
        "scheme {}: {} step sizes, noise floor {:e}",
        scheme.name,
        cfg.sweep.dts.len(),
        noise_floor
    )?;
    write_fit_line(&mut summary, "total", &total_fit)?;
    for (process, norms) in &stage_norms {
        let fit = fit_above_floor(&cfg.sweep.dts, norms, noise_floor);
        write_fit_line(&mut summary, &format!("stage {process}"), &fit)?;
    }
    write_fit_line(&mut summary, "residual", &residual_fit)?;

    Ok(SweepOutcome {
        rows,
        summary,
        noise_floor,
        total_fit,
    })
}

/// Runs the original-vs-revised coupling comparison and renders rows plus
/// the sign/ratio summary.
pub fn run_compare(cfg: &RunConfig, over: &Overrides) -> Result<(Vec<ReportRow>, String)> {
    let problem = cfg.problem.build()?;
    let tol = tolerances(cfg, over);
    let report =
        splitlab_core::dust::compare_schemes_report(&problem, cfg.sweep.t_n, &cfg.sweep.dts, tol)?;

    let mut rows = Vec::new();
    for r in &report.rows {
        rows.push(ReportRow {
            scheme: "eam_original".to_string(),
            process: "B".to_string(),
            dt: r.dt,
            measured: r.lte_b_original,
            predicted_leading: r.predicted_original,
            residual: r.lte_b_original - r.predicted_original,
            below_noise_floor: r.below_noise_floor,
        });
        rows.push(ReportRow {
            scheme: "eam_revised".to_string(),
            process: "B".to_string(),
            dt: r.dt,
            measured: r.lte_b_revised,
            predicted_leading: r.predicted_revised,
            residual: r.lte_b_revised - r.predicted_revised,
            below_noise_floor: r.below_noise_floor,
        });
    }
    sort_rows(&mut rows);

    let sign = if report.original_sign_negative() {
        "negative"
    } else {
        "mixed"
    };
    let ratio = report
        .rows
        .iter()
        .rev()
        .find(|r| !r.below_noise_floor)
        .map(|r| r.magnitude_ratio);
    let mut summary = String::new();
    match ratio {
        Some(ratio) => writeln!(summary, "lte_B sign: {sign} (original); |Rev|/|Ori| = {ratio:.2}")?,
        None => writeln!(summary, "lte_B below noise floor at every step size")?,
    }
    writeln!(
        summary,
        "bottom layer {}: |A - C| = {:e}, |-A - C| = {:e}",
        report.bottom_layer, report.factor_original, report.factor_revised
    )?;
    Ok((rows, summary))
}

/// Writes rows to the configured destination (file or stdout) in the
/// configured format (`csv` default, or `json`).
pub fn emit_rows(rows: &[ReportRow], cfg: &RunConfig, over: &Overrides) -> Result<Option<PathBuf>> {
    let path = over
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o: &OutputConfig| o.path.clone()));
    let format = over
        .format
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.format.clone()))
        .unwrap_or_else(|| "csv".to_string());

    let mut buf: Vec<u8> = Vec::new();
    match format.as_str() {
        "csv" => report::write_csv(&mut buf, rows)?,
        "json" => report::write_json(&mut buf, rows)?,
        other => bail!("unknown output format `{other}` (expected csv or json)"),
    }
    match &path {
        Some(p) => {
            std::fs::write(p, &buf).with_context(|| format!("cannot write {}", p.display()))?
        }
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(path)
}

fn tolerances(cfg: &RunConfig, over: &Overrides) -> Tolerances {
    let mut tol = Tolerances::default();
    if let Some(r) = cfg.sweep.tol_rel {
        tol.rel = r;
    }
    if let Some(a) = cfg.sweep.tol_abs {
        tol.abs = a;
    }
    if let Some(r) = over.tol_rel {
        tol.rel = r;
    }
    if let Some(a) = over.tol_abs {
        tol.abs = a;
    }
    tol
}

fn integrator(cfg: &RunConfig, over: &Overrides, tol: Tolerances) -> Result<IntegratorKind> {
    let name = over
        .integrator
        .as_deref()
        .or(cfg.sweep.integrator.as_deref())
        .unwrap_or("exact");
    parse_integrator(name, tol)
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn fit_above_floor(dts: &[f64], norms: &[f64], floor: f64) -> Option<OrderFit> {
    let mut fd = Vec::new();
    let mut fe = Vec::new();
    for (&dt, &e) in dts.iter().zip(norms) {
        if e >= floor {
            fd.push(dt);
            fe.push(e);
        }
    }
    fit_order(&fd, &fe).ok()
}

fn write_fit_line(out: &mut String, label: &str, fit: &Option<OrderFit>) -> Result<()> {
    match fit {
        Some(f) => writeln!(out, "{label} slope: {:.3} (r^2 {:.4})", f.slope, f.r_squared)?,
        None => writeln!(out, "{label}: below noise floor, no fit")?,
    }
    Ok(())
}

/// Maps an error chain to the documented process exit code: 2 for input
/// problems, 1 for runtime/solver failures.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<splitlab_core::Error>() {
            return match core {
                splitlab_core::Error::SolverFailure { .. } | splitlab_core::Error::Internal(_) => 1,
                _ => 2,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return 2;
        }
    }
    // Remaining anyhow-level messages are argument/config validation.
    2
}

/// Convenience used by integration tests: loads and validates a config.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    config::load_config(path)
}
