//! Local truncation error: measurement against the reference solve,
//! per-stage attribution, leading-order prediction from scheme structure,
//! and convergence-order fitting.
//!
//! The leading-order coefficient rule: a stage integrating process `i`
//! whose input carries the increment of process `j`'s stage with
//! coefficient `c` contributes `s[i<-j] = 2c - 1`; an absent term gives
//! `-1` (pure isolation of `j`'s influence), `c = 1` gives `+1` (a full
//! timestep of `j` in the input overcompensates). The predicted leading
//! term is `(dt^2/2) * sum_j s[i<-j] * (dX_i/dq) X_j` at `q(t_n)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::math;
use crate::ode::{reference_solve, ProblemSpec, Tolerances};
use crate::rational::Rational;
use crate::scheme::{step, validate_consistency, IntegratorKind, SchemeSpec};
use crate::Error;

/// Signed rational coefficients of the leading-order error terms
/// `(dt^2/2) * s[i<-j] * (dX_i/dq) X_j`, keyed by
/// (consumer process, source process).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientMatrix {
    processes: Vec<String>,
    entries: BTreeMap<(String, String), Rational>,
    extrapolated: bool,
}

impl CoefficientMatrix {
    /// Processes in stage order.
    pub fn processes(&self) -> &[String] {
        &self.processes
    }

    pub fn get(&self, consumer: &str, source: &str) -> Option<Rational> {
        self.entries
            .get(&(consumer.to_string(), source.to_string()))
            .copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, Rational)> {
        self.entries
            .iter()
            .map(|((i, j), s)| (i.as_str(), j.as_str(), *s))
    }

    /// True when some input coefficient fell outside {0, 1}, where the
    /// `2c - 1` rule extrapolates beyond the derived cases.
    pub fn is_extrapolated(&self) -> bool {
        self.extrapolated
    }
}

fn require_consistent(scheme: &SchemeSpec, problem: &ProblemSpec) -> crate::Result<()> {
    let violations = validate_consistency(scheme, problem);
    if let Some(v) = violations.first() {
        return Err(Error::InconsistentScheme(format!("{v}")));
    }
    Ok(())
}

/// Applies the `2c - 1` rule to every (consumer, source) pair of the
/// scheme. Requires each process to appear in exactly one stage.
pub fn predict_leading_coefficients(scheme: &SchemeSpec) -> crate::Result<CoefficientMatrix> {
    let mut processes: Vec<String> = Vec::new();
    for stage in scheme.stages() {
        if processes.contains(&stage.process) {
            return Err(Error::InconsistentScheme(format!(
                "process {} integrated more than once per step",
                stage.process
            )));
        }
        processes.push(stage.process.clone());
    }
    if processes.len() < 2 {
        return Err(Error::InconsistentScheme(
            "coefficient prediction needs at least two processes".into(),
        ));
    }
    let mut entries = BTreeMap::new();
    let mut extrapolated = false;
    for consumer in scheme.stages() {
        for source in scheme.stages() {
            if consumer.id == source.id {
                continue;
            }
            let c = consumer.input.coeff_of(&source.id);
            if c != Rational::ZERO && c != Rational::ONE {
                extrapolated = true;
            }
            let s = Rational::integer(2) * c - Rational::ONE;
            entries.insert((consumer.process.clone(), source.process.clone()), s);
        }
    }
    Ok(CoefficientMatrix {
        processes,
        entries,
        extrapolated,
    })
}

/// Leading-order LTE prediction at state `q`: per consumer process the
/// vector `(dt^2/2) * sum_j s[i<-j] * J_i(q) X_j(q)`, plus their sum.
/// Total prediction plus its per-process decomposition.
pub type LtePrediction = (Vec<f64>, BTreeMap<String, Vec<f64>>);

pub fn predict_leading_lte(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    q: &[f64],
    dt: f64,
) -> crate::Result<LtePrediction> {
    require_consistent(scheme, problem)?;
    let coeffs = predict_leading_coefficients(scheme)?;
    let dim = problem.dim();
    let tendencies: BTreeMap<&str, Vec<f64>> = problem
        .processes()
        .iter()
        .map(|p| (p.name(), p.tendency(q)))
        .collect();

    let mut per_process: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut total = alloc::vec![0.0; dim];
    let factor = dt * dt / 2.0;
    for consumer in problem.processes() {
        let jac = consumer.jacobian_matrix(q);
        let mut term = alloc::vec![0.0; dim];
        for source in problem.processes() {
            if source.name() == consumer.name() {
                continue;
            }
            let s = coeffs
                .get(consumer.name(), source.name())
                .ok_or_else(|| Error::Internal("missing coefficient entry".into()))?
                .to_f64();
            let x_j = &tendencies[source.name()];
            for row in 0..dim {
                let mut jx = 0.0;
                for col in 0..dim {
                    jx += jac[row * dim + col] * x_j[col];
                }
                term[row] += s * jx;
            }
        }
        for v in term.iter_mut() {
            *v *= factor;
        }
        for (t, v) in total.iter_mut().zip(&term) {
            *t += *v;
        }
        per_process.insert(consumer.name().to_string(), term);
    }
    Ok((total, per_process))
}

/// Exact solution of the multi-process problem at `t_n`, from the
/// problem's initial condition.
pub fn state_at(problem: &ProblemSpec, t_n: f64, tol: Tolerances) -> crate::Result<Vec<f64>> {
    Ok(reference_solve(problem, problem.q_ic(), t_n, tol)?.q_end)
}

/// Measured LTE at `q(t_n)` together with its per-stage attribution. Both
/// come from the same reference solve over the step, so the weighted
/// attribution sum reproduces the total to within solver tolerance.
pub struct LtePoint {
    pub q_n: Vec<f64>,
    pub total: Vec<f64>,
    pub per_stage: BTreeMap<String, Vec<f64>>,
}

/// One-step error of the scheme started from the exact solution at `t_n`,
/// decomposed stage by stage: stage increment minus the exact-trajectory
/// process integral over the step.
pub fn lte_with_attribution(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    t_n: f64,
    dt: f64,
    tol: Tolerances,
) -> crate::Result<LtePoint> {
    lte_with_attribution_using(scheme, problem, t_n, dt, tol, IntegratorKind::Exact(tol))
}

/// Like [`lte_with_attribution`] but advancing each stage with the given
/// sub-integrator. The reference trajectory is still the adaptive solve.
pub fn lte_with_attribution_using(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    t_n: f64,
    dt: f64,
    tol: Tolerances,
    integ: IntegratorKind,
) -> crate::Result<LtePoint> {
    require_consistent(scheme, problem)?;
    let q_n = state_at(problem, t_n, tol)?;
    let exact = reference_solve(problem, &q_n, dt, tol)?;
    let out = step(scheme, problem, &q_n, dt, integ)?;

    let dim = problem.dim();
    let total: Vec<f64> = (0..dim).map(|i| out.q_next[i] - exact.q_end[i]).collect();

    let mut per_stage = BTreeMap::new();
    for stage in scheme.stages() {
        let idx = problem.process_index(&stage.process).ok_or_else(|| {
            Error::Internal(format!("unknown process {} after validation", stage.process))
        })?;
        let incr = &out.increments[&stage.id];
        let integral = &exact.process_integrals[idx];
        let attr: Vec<f64> = (0..dim).map(|i| incr[i] - integral[i]).collect();
        per_stage.insert(stage.id.clone(), attr);
    }
    Ok(LtePoint {
        q_n,
        total,
        per_stage,
    })
}

/// Measured one-step LTE vector `F_dt(q(t_n)) - q(t_n + dt)`.
pub fn measure_lte(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    t_n: f64,
    dt: f64,
    tol: Tolerances,
) -> crate::Result<Vec<f64>> {
    Ok(lte_with_attribution(scheme, problem, t_n, dt, tol)?.total)
}

/// Per-stage LTE attribution, keyed by stage id.
pub fn attribute_lte(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    t_n: f64,
    dt: f64,
    tol: Tolerances,
) -> crate::Result<BTreeMap<String, Vec<f64>>> {
    Ok(lte_with_attribution(scheme, problem, t_n, dt, tol)?.per_stage)
}

/// Log-log least-squares fit of error norms against step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Least-squares line in (log dt, log error); the slope estimates the
/// convergence order.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> crate::Result<OrderFit> {
    if dts.len() != errors.len() {
        return Err(Error::invalid("dts and errors lengths differ"));
    }
    if dts.len() < 3 {
        return Err(Error::invalid("order fit needs at least 3 samples"));
    }
    if dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("dts must be strictly decreasing"));
    }
    if errors.iter().any(|&e| e <= 0.0) {
        return Err(Error::invalid(
            "errors must be positive (drop noise-dominated samples)",
        ));
    }
    let n = dts.len() as f64;
    let xs: Vec<f64> = dts.iter().map(|&dt| math::ln(dt)).collect();
    let ys: Vec<f64> = errors.iter().map(|&e| math::ln(e)).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
        syy += (y - y_mean) * (y - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        dts: dts.to_vec(),
        errors: errors.to_vec(),
    })
}

/// One sweep sample: measured and predicted LTE at a single `dt`.
pub struct LteSample {
    pub dt: f64,
    pub measured_total: Vec<f64>,
    pub measured_per_stage: BTreeMap<String, Vec<f64>>,
    pub predicted_total: Vec<f64>,
    pub predicted_per_stage: BTreeMap<String, Vec<f64>>,
    /// Measured total below 100x the oracle tolerance; excluded from fits.
    pub below_noise_floor: bool,
}

/// Sweep over step sizes with order fits for the total LTE, each stage's
/// attribution, and the residual (measured minus predicted leading term).
pub struct LteReport {
    pub scheme_name: String,
    pub samples: Vec<LteSample>,
    pub total_fit: Option<OrderFit>,
    /// Keyed by stage id; `None` when every sample sat below the noise
    /// floor.
    pub stage_fits: BTreeMap<String, Option<OrderFit>>,
    pub residual_fit: Option<OrderFit>,
    /// Oracle noise floor the flags were computed against.
    pub noise_floor: f64,
}

fn fit_filtered(dts: &[f64], norms: &[f64], floor: f64) -> Option<OrderFit> {
    let mut fdts = Vec::new();
    let mut ferrs = Vec::new();
    for (&dt, &e) in dts.iter().zip(norms) {
        if e >= floor {
            fdts.push(dt);
            ferrs.push(e);
        }
    }
    fit_order(&fdts, &ferrs).ok()
}

/// Runs [`lte_with_attribution`] and [`predict_leading_lte`] at each `dt`
/// and fits convergence orders. `dts` must be strictly decreasing.
pub fn lte_sweep(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    t_n: f64,
    dts: &[f64],
    tol: Tolerances,
) -> crate::Result<LteReport> {
    lte_sweep_using(scheme, problem, t_n, dts, tol, IntegratorKind::Exact(tol))
}

/// [`lte_sweep`] with an explicit stage sub-integrator.
pub fn lte_sweep_using(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    t_n: f64,
    dts: &[f64],
    tol: Tolerances,
    integ: IntegratorKind,
) -> crate::Result<LteReport> {
    if dts.len() < 3 {
        return Err(Error::invalid("sweep needs at least 3 step sizes"));
    }
    if dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("dts must be strictly decreasing"));
    }
    let q_n = state_at(problem, t_n, tol)?;
    let noise_floor = 100.0 * (tol.abs + tol.rel * math::max_norm(&q_n));

    let mut samples = Vec::with_capacity(dts.len());
    for &dt in dts {
        let point = lte_with_attribution_using(scheme, problem, t_n, dt, tol, integ)?;
        let (pred_total, pred_per_process) = predict_leading_lte(scheme, problem, &point.q_n, dt)?;
        // Re-key predictions by stage id to align with the attribution.
        let mut predicted_per_stage = BTreeMap::new();
        for stage in scheme.stages() {
            if let Some(v) = pred_per_process.get(&stage.process) {
                predicted_per_stage.insert(stage.id.clone(), v.clone());
            }
        }
        let below = math::max_norm(&point.total) < noise_floor;
        samples.push(LteSample {
            dt,
            measured_total: point.total,
            measured_per_stage: point.per_stage,
            predicted_total: pred_total,
            predicted_per_stage,
            below_noise_floor: below,
        });
    }

    let total_norms: Vec<f64> = samples
        .iter()
        .map(|s| math::max_norm(&s.measured_total))
        .collect();
    let total_fit = fit_filtered(dts, &total_norms, noise_floor);

    let mut stage_fits = BTreeMap::new();
    for stage in scheme.stages() {
        let norms: Vec<f64> = samples
            .iter()
            .map(|s| math::max_norm(&s.measured_per_stage[&stage.id]))
            .collect();
        stage_fits.insert(stage.id.clone(), fit_filtered(dts, &norms, noise_floor));
    }

    let residual_norms: Vec<f64> = samples
        .iter()
        .map(|s| {
            let diff: Vec<f64> = s
                .measured_total
                .iter()
                .zip(&s.predicted_total)
                .map(|(m, p)| m - p)
                .collect();
            math::max_norm(&diff)
        })
        .collect();
    let residual_fit = fit_filtered(dts, &residual_norms, noise_floor);

    Ok(LteReport {
        scheme_name: scheme.name.clone(),
        samples,
        total_fit,
        stage_fits,
        residual_fit,
        noise_floor,
    })
}

/// End-to-end error after `N = T/dt` repeated steps, measured against the
/// reference solve. `T` must be an integer multiple of `dt`.
pub fn global_error(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    t_end: f64,
    dt: f64,
    tol: Tolerances,
) -> crate::Result<f64> {
    require_consistent(scheme, problem)?;
    if dt <= 0.0 || t_end <= 0.0 {
        return Err(Error::invalid("t_end and dt must be positive"));
    }
    let ratio = t_end / dt;
    let n = libm::round(ratio);
    if math::abs(ratio - n) > 1e-9 * math::max(1.0, ratio) {
        return Err(Error::invalid("t_end must be an integer multiple of dt"));
    }
    let mut q = problem.q_ic().to_vec();
    for _ in 0..(n as u64) {
        q = step(scheme, problem, &q, dt, IntegratorKind::Exact(tol))?.q_next;
    }
    let exact = reference_solve(problem, problem.q_ic(), t_end, tol)?;
    let diff: Vec<f64> = q.iter().zip(&exact.q_end).map(|(a, b)| a - b).collect();
    Ok(math::max_norm(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::abs;
    use libm::exp;
    use crate::ode::ProcessModel;
    use crate::scheme::{builtin_scheme, parse_scheme, BuiltinKind};

    fn linear_pair(alpha: f64, beta: f64) -> ProblemSpec {
        let a = ProcessModel::scalar_with_jacobian("A", move |q| alpha * q, move |_| alpha);
        let b = ProcessModel::scalar_with_jacobian("B", move |q| beta * q, move |_| beta);
        ProblemSpec::new(alloc::vec![a, b], 1, alloc::vec![1.0]).unwrap()
    }

    fn dust_like() -> ProblemSpec {
        let a = ProcessModel::scalar_with_jacobian("A", |_| 2.0, |_| 0.0);
        let b = ProcessModel::scalar_with_jacobian("B", |q| -q, |_| -1.0);
        let c = ProcessModel::scalar_with_jacobian("C", |q| -0.5 * q, |_| -0.5);
        ProblemSpec::new(alloc::vec![a, b, c], 1, alloc::vec![1.0]).unwrap()
    }

    #[test]
    fn parallel_coefficients_all_minus_one() {
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let m = predict_leading_coefficients(&s).unwrap();
        assert_eq!(m.get("A", "B"), Some(Rational::MINUS_ONE));
        assert_eq!(m.get("B", "A"), Some(Rational::MINUS_ONE));
        assert!(!m.is_extrapolated());
    }

    #[test]
    fn sequential_coefficients_signed() {
        let s = builtin_scheme(BuiltinKind::Sequential, &["A", "B"]).unwrap();
        let m = predict_leading_coefficients(&s).unwrap();
        assert_eq!(m.get("A", "B"), Some(Rational::MINUS_ONE));
        assert_eq!(m.get("B", "A"), Some(Rational::ONE));
    }

    #[test]
    fn eam_original_rows() {
        let s = builtin_scheme(BuiltinKind::EamOriginal, &["A", "B", "C"]).unwrap();
        let m = predict_leading_coefficients(&s).unwrap();
        assert_eq!(m.get("A", "B"), Some(Rational::MINUS_ONE));
        assert_eq!(m.get("A", "C"), Some(Rational::MINUS_ONE));
        assert_eq!(m.get("B", "A"), Some(Rational::ONE));
        assert_eq!(m.get("B", "C"), Some(Rational::MINUS_ONE));
        assert_eq!(m.get("C", "A"), Some(Rational::ONE));
        assert_eq!(m.get("C", "B"), Some(Rational::ONE));
    }

    #[test]
    fn eam_revised_b_row_isolated() {
        let s = builtin_scheme(BuiltinKind::EamRevised, &["A", "B", "C"]).unwrap();
        let m = predict_leading_coefficients(&s).unwrap();
        assert_eq!(m.get("B", "A"), Some(Rational::MINUS_ONE));
        assert_eq!(m.get("B", "C"), Some(Rational::MINUS_ONE));
        assert_eq!(m.get("C", "A"), Some(Rational::ONE));
        assert_eq!(m.get("C", "B"), Some(Rational::ONE));
    }

    #[test]
    fn half_weights_cancel() {
        let src = "scheme half {\n stage a: A from base\n stage b: B from base\n stage c: C from base + 1/2*a + 1/2*b\n}";
        let s = parse_scheme(src).unwrap();
        let m = predict_leading_coefficients(&s).unwrap();
        assert_eq!(m.get("C", "A"), Some(Rational::ZERO));
        assert_eq!(m.get("C", "B"), Some(Rational::ZERO));
        assert!(m.is_extrapolated());
    }

    #[test]
    fn duplicate_process_rejected() {
        let src = "scheme dup {\n stage a1: A from base\n stage a2: A from base\n}";
        let s = parse_scheme(src).unwrap();
        assert!(predict_leading_coefficients(&s).is_err());
    }

    #[test]
    fn parallel_linear_lte_closed_form() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let tol = Tolerances::default();
        let lte = measure_lte(&s, &p, 0.0, 0.01, tol).unwrap();
        let exact = exp(-0.01) + exp(-0.02) - 1.0 - exp(-0.03);
        assert!(abs(lte[0] - exact) < 1e-10);
        // leading prediction -alpha*beta*q*dt^2 = -2e-4
        let (pred, _) = predict_leading_lte(&s, &p, &[1.0], 0.01).unwrap();
        assert!(abs(pred[0] + 2.0e-4) < 1e-12);
        assert!(abs(lte[0] - pred[0]) < 0.02 * 2.0e-4);
    }

    #[test]
    fn sequential_commuting_linear_is_exact() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Sequential, &["A", "B"]).unwrap();
        let lte = measure_lte(&s, &p, 0.0, 0.01, Tolerances::default()).unwrap();
        assert!(abs(lte[0]) < 1e-10);
    }

    #[test]
    fn constant_tendencies_make_schemes_exact() {
        let a = ProcessModel::scalar("A", |_| 2.0);
        let b = ProcessModel::scalar("B", |_| -3.0);
        let p = ProblemSpec::new(alloc::vec![a, b], 1, alloc::vec![1.0]).unwrap();
        for kind in [BuiltinKind::Parallel, BuiltinKind::Sequential] {
            let s = builtin_scheme(kind, &["A", "B"]).unwrap();
            let lte = measure_lte(&s, &p, 0.0, 0.05, Tolerances::default()).unwrap();
            assert!(abs(lte[0]) < 1e-11, "{kind:?}: {}", lte[0]);
        }
    }

    #[test]
    fn attribution_matches_three_process_leading_terms() {
        let p = dust_like();
        let tol = Tolerances::default();
        let dt = 0.01;
        let ori = builtin_scheme(BuiltinKind::EamOriginal, &["A", "B", "C"]).unwrap();
        let attr = attribute_lte(&ori, &p, 0.0, dt, tol).unwrap();
        // Leading terms at q=1: lte_B = (dt^2/2)(-1)(A - C) = -1.25e-4,
        // lte_C = (dt^2/2)(-0.5)(A + B) = -2.5e-5, lte_A = 0.
        assert!(abs(attr["b"][0] + 1.25e-4) < 3e-6);
        assert!(abs(attr["c"][0] + 2.5e-5) < 3e-6);
        assert!(abs(attr["a"][0]) < 1e-10);

        let rev = builtin_scheme(BuiltinKind::EamRevised, &["A", "B", "C"]).unwrap();
        let attr = attribute_lte(&rev, &p, 0.0, dt, tol).unwrap();
        assert!(abs(attr["b"][0] - 7.5e-5) < 3e-6);
        assert!(abs(attr["c"][0] + 2.5e-5) < 3e-6);
    }

    #[test]
    fn vanishing_partner_gives_zero_attribution() {
        let a = ProcessModel::scalar("A", |q| -q);
        let b = ProcessModel::scalar("B", |_| 0.0);
        let p = ProblemSpec::new(alloc::vec![a, b], 1, alloc::vec![1.0]).unwrap();
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let attr = attribute_lte(&s, &p, 0.0, 0.01, Tolerances::default()).unwrap();
        assert!(abs(attr["a"][0]) < 1e-11);
    }

    #[test]
    fn attribution_sums_to_total() {
        let p = dust_like();
        let s = builtin_scheme(BuiltinKind::EamOriginal, &["A", "B", "C"]).unwrap();
        let tol = Tolerances::default();
        let point = lte_with_attribution(&s, &p, 0.1, 0.02, tol).unwrap();
        let mut sum = 0.0;
        for stage in s.stages() {
            sum += s.output_weight(&stage.id).to_f64() * point.per_stage[&stage.id][0];
        }
        let oracle_tol = tol.abs + tol.rel * math::max_norm(&point.q_n);
        assert!(abs(sum - point.total[0]) <= 10.0 * oracle_tol);
    }

    #[test]
    fn predicted_totals_match_hand_evaluation() {
        let p = dust_like();
        let dt = 0.01;
        let ori = builtin_scheme(BuiltinKind::EamOriginal, &["A", "B", "C"]).unwrap();
        let (total, _) = predict_leading_lte(&ori, &p, &[1.0], dt).unwrap();
        assert!(abs(total[0] + 1.5e-4) < 1e-15);
        let rev = builtin_scheme(BuiltinKind::EamRevised, &["A", "B", "C"]).unwrap();
        let (total, _) = predict_leading_lte(&rev, &p, &[1.0], dt).unwrap();
        assert!(abs(total[0] - 5.0e-5) < 1e-15);
    }

    #[test]
    fn fit_order_recovers_power_laws() {
        let dts = [0.1, 0.05, 0.025];
        let f = fit_order(&dts, &[1e-2, 2.5e-3, 6.25e-4]).unwrap();
        assert!(abs(f.slope - 2.0) < 1e-12);
        assert!(abs(f.r_squared - 1.0) < 1e-12);
        let f = fit_order(&dts, &[1e-3, 1.25e-4, 1.5625e-5]).unwrap();
        assert!(abs(f.slope - 3.0) < 1e-12);
        let f = fit_order(&dts, &[0.5, 0.5, 0.5]).unwrap();
        assert!(abs(f.slope) < 1e-12);
    }

    #[test]
    fn fit_order_rejects_bad_input() {
        assert!(fit_order(&[0.1, 0.05], &[1.0, 0.5]).is_err());
        assert!(fit_order(&[0.1, 0.2, 0.05], &[1.0, 0.5, 0.2]).is_err());
        assert!(fit_order(&[0.1, 0.05, 0.025], &[1.0, 0.0, 0.2]).is_err());
    }

    #[test]
    fn sweep_parallel_linear_orders() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let report = lte_sweep(&s, &p, 0.0, &[0.04, 0.02, 0.01, 0.005], Tolerances::default())
            .unwrap();
        let fit = report.total_fit.as_ref().unwrap();
        assert!(abs(fit.slope - 2.0) < 0.05, "slope {}", fit.slope);
        let residual = report.residual_fit.as_ref().unwrap();
        assert!(abs(residual.slope - 3.0) < 0.3, "residual {}", residual.slope);
    }

    #[test]
    fn sweep_flags_noise_floor_for_exact_scheme() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Sequential, &["A", "B"]).unwrap();
        let report = lte_sweep(&s, &p, 0.0, &[0.04, 0.02, 0.01, 0.005], Tolerances::default())
            .unwrap();
        assert!(report.samples.iter().all(|s| s.below_noise_floor));
        assert!(report.total_fit.is_none());
    }

    #[test]
    fn global_error_single_step_equals_lte() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let tol = Tolerances::default();
        let ge = global_error(&s, &p, 0.01, 0.01, tol).unwrap();
        let lte = measure_lte(&s, &p, 0.0, 0.01, tol).unwrap();
        assert!(abs(ge - math::max_norm(&lte)) < 1e-12);
    }

    #[test]
    fn global_error_first_order_accumulation() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let tol = Tolerances::default();
        let dts = [0.05, 0.025, 0.0125];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| global_error(&s, &p, 0.4, dt, tol).unwrap())
            .collect();
        let fit = fit_order(&dts, &errs).unwrap();
        assert!(abs(fit.slope - 1.0) < 0.15, "global slope {}", fit.slope);
    }

    #[test]
    fn global_error_requires_integer_steps() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        assert!(global_error(&s, &p, 0.25, 0.1, Tolerances::default()).is_err());
    }
}
