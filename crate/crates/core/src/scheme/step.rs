//! One coupled step of a scheme, with exact or discrete per-process
//! integration.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg;
use crate::math;
use crate::ode::{process_solve, ProblemSpec, ProcessModel, Tolerances};
use crate::Error;

use super::types::SchemeSpec;

/// How each stage's one-process ODE is advanced over the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegratorKind {
    /// Adaptive solve to the given tolerances (the semi-discrete setting).
    Exact(Tolerances),
    ForwardEuler,
    BackwardEuler,
}

/// Result of one coupled step.
pub struct StepOutput {
    pub q_next: Vec<f64>,
    /// Per-stage increments `Phi(input) - input`, keyed by stage id.
    pub increments: BTreeMap<String, Vec<f64>>,
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

fn forward_euler(process: &ProcessModel, q: &[f64], dt: f64) -> Vec<f64> {
    let mut out = q.to_vec();
    let tendency = process.tendency(q);
    for (o, t) in out.iter_mut().zip(&tendency) {
        *o += dt * t;
    }
    out
}

/// Solves `y = q + dt * X(y)` by damped Newton with the process Jacobian.
fn backward_euler(process: &ProcessModel, q: &[f64], dt: f64) -> crate::Result<Vec<f64>> {
    let dim = q.len();
    let mut y = forward_euler(process, q, dt); // predictor
    let residual = |y: &[f64]| -> Vec<f64> {
        let tendency = process.tendency(y);
        let mut r = alloc::vec![0.0; dim];
        for i in 0..dim {
            r[i] = y[i] - q[i] - dt * tendency[i];
        }
        r
    };
    let mut r = residual(&y);
    let mut r_norm = math::max_norm(&r);
    for _ in 0..NEWTON_MAX_ITER {
        if r_norm <= NEWTON_TOL {
            return Ok(y);
        }
        let jac = process.jacobian_matrix(&y);
        let mut a = alloc::vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                a[i * dim + j] = -dt * jac[i * dim + j];
            }
            a[i * dim + i] += 1.0;
        }
        let mut rhs = r.clone();
        let delta = linalg::solve_in_place(&mut a, &mut rhs)?;
        // Halve the step until the residual norm stops growing.
        let mut lambda = 1.0;
        loop {
            let mut trial = y.clone();
            for i in 0..dim {
                trial[i] -= lambda * delta[i];
            }
            let r_trial = residual(&trial);
            let trial_norm = math::max_norm(&r_trial);
            if trial_norm < r_norm || lambda < 1.0 / 1024.0 {
                y = trial;
                r = r_trial;
                r_norm = trial_norm;
                break;
            }
            lambda *= 0.5;
        }
    }
    if r_norm <= NEWTON_TOL {
        Ok(y)
    } else {
        Err(Error::SolverFailure {
            message: format!(
                "backward-Euler Newton stalled for process {} (residual {r_norm:.3e})",
                process.name()
            ),
            last_time: 0.0,
        })
    }
}

fn advance(
    process: &ProcessModel,
    q: &[f64],
    dt: f64,
    integ: IntegratorKind,
) -> crate::Result<Vec<f64>> {
    if dt == 0.0 {
        return Ok(q.to_vec());
    }
    match integ {
        IntegratorKind::Exact(tol) => process_solve(process, q, dt, tol),
        IntegratorKind::ForwardEuler => Ok(forward_euler(process, q, dt)),
        IntegratorKind::BackwardEuler => backward_euler(process, q, dt),
    }
}

/// Executes the scheme stage by stage from `q_n`: each stage's input is
/// `q_n` plus its weighted earlier increments, and the output is `q_n` plus
/// the weighted sum of all increments.
pub fn step(
    scheme: &SchemeSpec,
    problem: &ProblemSpec,
    q_n: &[f64],
    dt: f64,
    integ: IntegratorKind,
) -> crate::Result<StepOutput> {
    if q_n.len() != problem.dim() {
        return Err(Error::invalid("state dimension mismatch"));
    }
    if dt < 0.0 {
        return Err(Error::invalid("dt must be nonnegative"));
    }
    let dim = problem.dim();
    let mut increments: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for stage in scheme.stages() {
        let process = problem.process_by_name(&stage.process).ok_or_else(|| {
            Error::Internal(format!(
                "stage {} references unknown process {}",
                stage.id, stage.process
            ))
        })?;
        let mut input = q_n.to_vec();
        for (referenced, coeff) in &stage.input.terms {
            let incr = increments.get(referenced).ok_or_else(|| {
                Error::Internal(format!("unresolved stage reference `{referenced}`"))
            })?;
            let c = coeff.to_f64();
            for i in 0..dim {
                input[i] += c * incr[i];
            }
        }
        let out = advance(process, &input, dt, integ)?;
        let incr: Vec<f64> = out.iter().zip(&input).map(|(o, i)| o - i).collect();
        increments.insert(stage.id.clone(), incr);
    }

    let mut q_next = q_n.to_vec();
    for stage in scheme.stages() {
        let w = scheme.output_weight(&stage.id).to_f64();
        if w == 0.0 {
            continue;
        }
        let incr = &increments[&stage.id];
        for i in 0..dim {
            q_next[i] += w * incr[i];
        }
    }
    Ok(StepOutput { q_next, increments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::abs;
    use libm::exp;
    use crate::scheme::{builtin_scheme, BuiltinKind};

    fn linear_pair(alpha: f64, beta: f64) -> ProblemSpec {
        let a = ProcessModel::scalar_with_jacobian("A", move |q| alpha * q, move |_| alpha);
        let b = ProcessModel::scalar_with_jacobian("B", move |q| beta * q, move |_| beta);
        ProblemSpec::new(alloc::vec![a, b], 1, alloc::vec![1.0]).unwrap()
    }

    fn exact() -> IntegratorKind {
        IntegratorKind::Exact(Tolerances::default())
    }

    #[test]
    fn sequential_linear_is_product_of_exponentials() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Sequential, &["A", "B"]).unwrap();
        let out = step(&s, &p, &[1.0], 0.01, exact()).unwrap();
        assert!(abs(out.q_next[0] - exp(-0.03)) < 1e-12);
    }

    #[test]
    fn parallel_linear_closed_form() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let out = step(&s, &p, &[1.0], 0.01, exact()).unwrap();
        let expected = exp(-0.01) + exp(-0.02) - 1.0;
        assert!(abs(out.q_next[0] - expected) < 1e-12);
    }

    #[test]
    fn zero_dt_is_identity() {
        let p = linear_pair(-1.0, -2.0);
        for integ in [exact(), IntegratorKind::ForwardEuler, IntegratorKind::BackwardEuler] {
            let s = builtin_scheme(BuiltinKind::Sequential, &["A", "B"]).unwrap();
            let out = step(&s, &p, &[1.0], 0.0, integ).unwrap();
            assert_eq!(out.q_next, alloc::vec![1.0]);
            assert!(out.increments.values().all(|v| v.iter().all(|&x| x == 0.0)));
        }
    }

    #[test]
    fn one_stage_scheme_equals_process_solve() {
        let mk = || ProcessModel::scalar("X", |q: f64| -q * q);
        let p = ProblemSpec::new(alloc::vec![mk()], 1, alloc::vec![1.0]).unwrap();
        let src = "scheme one {\n stage x: X from base\n}";
        let s = crate::scheme::parse_scheme(src).unwrap();
        let tol = Tolerances::default();
        let out = step(&s, &p, &[1.0], 0.2, IntegratorKind::Exact(tol)).unwrap();
        let direct = process_solve(&mk(), &[1.0], 0.2, tol).unwrap();
        assert_eq!(out.q_next, direct);
    }

    #[test]
    fn sequential_telescopes_to_nested_propagators() {
        let a = ProcessModel::scalar("A", |_| 2.0);
        let b = ProcessModel::scalar("B", |q| -q);
        let c = ProcessModel::scalar("C", |q| -0.5 * q * q);
        let p = ProblemSpec::new(alloc::vec![a, b, c], 1, alloc::vec![1.0]).unwrap();
        let s = builtin_scheme(BuiltinKind::Sequential, &["A", "B", "C"]).unwrap();
        let tol = Tolerances::default();
        let dt = 0.05;
        let out = step(&s, &p, &[1.0], dt, IntegratorKind::Exact(tol)).unwrap();

        let mk_a = || ProcessModel::scalar("A", |_| 2.0);
        let mk_b = || ProcessModel::scalar("B", |q: f64| -q);
        let mk_c = || ProcessModel::scalar("C", |q: f64| -0.5 * q * q);
        let qa = process_solve(&mk_a(), &[1.0], dt, tol).unwrap();
        let qb = process_solve(&mk_b(), &qa, dt, tol).unwrap();
        let qc = process_solve(&mk_c(), &qb, dt, tol).unwrap();
        assert!(abs(out.q_next[0] - qc[0]) < 10.0 * (tol.abs + tol.rel));
    }

    #[test]
    fn forward_euler_parallel_collapses_to_unsplit() {
        let p = linear_pair(-1.0, -2.0);
        let s = builtin_scheme(BuiltinKind::Parallel, &["A", "B"]).unwrap();
        let dt = 0.01;
        let out = step(&s, &p, &[1.0], dt, IntegratorKind::ForwardEuler).unwrap();
        let total = crate::ode::eval_total_rhs(&p, &[1.0]).unwrap();
        let unsplit = 1.0 + dt * total[0];
        assert!(abs(out.q_next[0] - unsplit) <= 4.0 * f64::EPSILON * abs(unsplit));
    }

    #[test]
    fn backward_euler_matches_linear_closed_form() {
        // For X = beta*q, backward Euler gives q / (1 - dt*beta).
        let b = ProcessModel::scalar_with_jacobian("B", |q| -2.0 * q, |_| -2.0);
        let got = backward_euler(&b, &[1.0], 0.1).unwrap();
        assert!(abs(got[0] - 1.0 / 1.2) < 1e-12);
    }

    #[test]
    fn backward_euler_nonlinear_converges() {
        let x = ProcessModel::scalar("X", |q: f64| -q * q * q);
        let y = backward_euler(&x, &[1.0], 0.2).unwrap();
        // residual check: y - 1 + 0.2*y^3 = 0
        assert!(abs(y[0] - 1.0 + 0.2 * y[0] * y[0] * y[0]) < 1e-11);
    }
}
