//! Multi-process ODE problems and the reference ("exact") integration they
//! are measured against.
//!
//! The reference solver is an adaptive embedded Dormand–Prince 5(4) pair
//! with PI step-size control, run at tolerances far below any truncation
//! error the analysis layer measures. Per-process integrals
//! `∫ X_i(q(η)) dη` are obtained by augmenting the state with one
//! quadrature variable per process so they inherit the solver's error
//! control.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::Error;

/// Shared signature for tendency functions: writes `X(q)` into `out`.
pub type RhsFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Jacobian functions write `dX/dq` row-major into `out` (`dim * dim`).
pub type JacFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// One right-hand-side term of the multi-process ODE, with an optional
/// analytic Jacobian. Without one, a central-difference fallback is used.
pub struct ProcessModel {
    name: String,
    rhs: Box<RhsFn>,
    jacobian: Option<Box<JacFn>>,
}

impl ProcessModel {
    pub fn new(name: impl Into<String>, rhs: Box<RhsFn>) -> Self {
        ProcessModel {
            name: name.into(),
            rhs,
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jacobian: Box<JacFn>) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    /// Convenience constructor for scalar (dim-1) processes.
    pub fn scalar(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ProcessModel::new(name, Box::new(move |q, out| out[0] = f(q[0])))
    }

    /// Scalar process with an analytic derivative.
    pub fn scalar_with_jacobian(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProcessModel::scalar(name, f).with_jacobian(Box::new(move |q, out| out[0] = df(q[0])))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluates the tendency into `out`.
    pub fn eval(&self, q: &[f64], out: &mut [f64]) {
        (self.rhs)(q, out);
    }

    pub fn tendency(&self, q: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; q.len()];
        self.eval(q, &mut out);
        out
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Row-major Jacobian `dX/dq`, analytic when supplied, otherwise central
    /// differences with the step `h_k = max(|q_k|, 1) * eps^(1/3)`.
    pub fn jacobian_matrix(&self, q: &[f64]) -> Vec<f64> {
        let dim = q.len();
        let mut out = alloc::vec![0.0; dim * dim];
        match &self.jacobian {
            Some(jac) => jac(q, &mut out),
            None => self.fd_jacobian(q, &mut out),
        }
        out
    }

    /// Finite-difference Jacobian, also used to cross-check supplied ones.
    pub fn fd_jacobian(&self, q: &[f64], out: &mut [f64]) {
        let dim = q.len();
        let mut qp = q.to_vec();
        let mut fp = alloc::vec![0.0; dim];
        let mut fm = alloc::vec![0.0; dim];
        for k in 0..dim {
            let h = math::max(math::abs(q[k]), 1.0) * math::cbrt(f64::EPSILON);
            qp[k] = q[k] + h;
            self.eval(&qp, &mut fp);
            qp[k] = q[k] - h;
            self.eval(&qp, &mut fm);
            qp[k] = q[k];
            for row in 0..dim {
                out[row * dim + k] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
    }
}

/// Ordered process list, state dimension, and initial condition.
pub struct ProblemSpec {
    processes: Vec<ProcessModel>,
    dim: usize,
    q_ic: Vec<f64>,
}

impl ProblemSpec {
    pub fn new(processes: Vec<ProcessModel>, dim: usize, q_ic: Vec<f64>) -> crate::Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if processes.is_empty() {
            return Err(Error::invalid("problem needs at least one process"));
        }
        if q_ic.len() != dim {
            return Err(Error::invalid("initial condition dimension mismatch"));
        }
        let mut names: Vec<&str> = processes.iter().map(|p| p.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate process name"));
        }
        Ok(ProblemSpec { processes, dim, q_ic })
    }

    pub fn processes(&self) -> &[ProcessModel] {
        &self.processes
    }

    pub fn process_by_name(&self, name: &str) -> Option<&ProcessModel> {
        self.processes.iter().find(|p| p.name() == name)
    }

    pub fn process_index(&self, name: &str) -> Option<usize> {
        self.processes.iter().position(|p| p.name() == name)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q_ic(&self) -> &[f64] {
        &self.q_ic
    }
}

/// Relative + absolute tolerances for the adaptive solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel: 1e-12, abs: 1e-14 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub steps: u64,
    pub rejected: u64,
}

/// Endpoint of a reference solve plus the per-process quadratures over the
/// solve window.
pub struct SolveResult {
    pub q_end: Vec<f64>,
    pub process_integrals: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

/// `Σ_i X_i(q)`.
pub fn eval_total_rhs(problem: &ProblemSpec, q: &[f64]) -> crate::Result<Vec<f64>> {
    if q.len() != problem.dim() {
        return Err(Error::invalid("state dimension mismatch"));
    }
    let mut total = alloc::vec![0.0; problem.dim()];
    let mut scratch = alloc::vec![0.0; problem.dim()];
    for p in problem.processes() {
        p.eval(q, &mut scratch);
        for (t, s) in total.iter_mut().zip(&scratch) {
            *t += *s;
        }
    }
    Ok(total)
}

// Dormand-Prince 5(4) tableau (autonomous form, so the c nodes are not
// needed).
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th-order weights and the embedded 4th-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: u64 = 5_000_000;

/// Integrates `dy/dt = f(y)` over `[0, horizon]` with the embedded 5(4)
/// pair. Autonomous form is all the callers need.
pub fn integrate_adaptive(
    f: &dyn Fn(&[f64], &mut [f64]),
    y0: &[f64],
    horizon: f64,
    tol: Tolerances,
) -> crate::Result<(Vec<f64>, SolveStats)> {
    if horizon < 0.0 {
        return Err(Error::invalid("horizon must be nonnegative"));
    }
    if tol.rel < 10.0 * f64::EPSILON {
        return Err(Error::invalid("tol.rel below 10 * machine epsilon"));
    }
    let mut y = y0.to_vec();
    let mut stats = SolveStats::default();
    if horizon == 0.0 {
        return Ok((y, stats));
    }

    let n = y.len();
    let mut k: [Vec<f64>; 7] = core::array::from_fn(|_| alloc::vec![0.0; n]);
    let mut y_stage = alloc::vec![0.0; n];
    let mut y_new = alloc::vec![0.0; n];

    f(&y, &mut k[0]);
    let mut h = initial_step(&y, &k[0], horizon, tol);
    let mut t = 0.0_f64;
    let mut err_prev: f64 = 1.0;
    let h_floor = 16.0 * f64::EPSILON * horizon;

    loop {
        if t >= horizon {
            return Ok((y, stats));
        }
        if stats.steps + stats.rejected > MAX_STEPS {
            return Err(Error::SolverFailure {
                message: "step budget exhausted".into(),
                last_time: t,
            });
        }
        if h < h_floor {
            return Err(Error::SolverFailure {
                message: "step size underflow".into(),
                last_time: t,
            });
        }
        let mut h_used = h;
        if t + h_used > horizon {
            h_used = horizon - t;
        }

        for stage in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (prev, &a) in A[stage][..stage].iter().enumerate() {
                    if a != 0.0 {
                        acc += a * k[prev][i];
                    }
                }
                y_stage[i] = y[i] + h_used * acc;
            }
            let (done, rest) = k.split_at_mut(stage);
            let _ = done;
            f(&y_stage, &mut rest[0]);
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL).
        y_new.copy_from_slice(&y_stage);

        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for stage in 0..7 {
                if E[stage] != 0.0 {
                    e += E[stage] * k[stage][i];
                }
            }
            e *= h_used;
            let scale = tol.abs + tol.rel * math::max(math::abs(y[i]), math::abs(y_new[i]));
            err_sq += (e / scale) * (e / scale);
        }
        let err = math::sqrt(err_sq / n as f64);
        if !err.is_finite() {
            return Err(Error::SolverFailure {
                message: "non-finite state or error estimate".into(),
                last_time: t,
            });
        }

        if err <= 1.0 {
            stats.steps += 1;
            t += h_used;
            y.copy_from_slice(&y_new);
            k.swap(0, 6); // FSAL
            let e = math::max(err, 1e-10);
            let factor = 0.9 * math::powf(e, -0.7 / 5.0) * math::powf(err_prev, 0.4 / 5.0);
            err_prev = e;
            h = h_used * math::min(5.0, math::max(0.2, factor));
        } else {
            stats.rejected += 1;
            let factor = 0.9 * math::powf(err, -0.2);
            h = h_used * math::max(0.2, math::min(1.0, factor));
        }
    }
}

fn initial_step(y0: &[f64], f0: &[f64], horizon: f64, tol: Tolerances) -> f64 {
    let n = y0.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y0.iter().zip(f0) {
        let scale = tol.abs + tol.rel * math::abs(*yi);
        d0 += (yi / scale) * (yi / scale);
        d1 += (fi / scale) * (fi / scale);
    }
    d0 = math::sqrt(d0 / n);
    d1 = math::sqrt(d1 / n);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    math::min(h0, horizon)
}

/// High-accuracy solve of the full multi-process problem over
/// `[0, horizon]`, with per-process integrals carried as extra quadrature
/// state.
pub fn reference_solve(
    problem: &ProblemSpec,
    q0: &[f64],
    horizon: f64,
    tol: Tolerances,
) -> crate::Result<SolveResult> {
    if q0.len() != problem.dim() {
        return Err(Error::invalid("state dimension mismatch"));
    }
    let dim = problem.dim();
    let n_proc = problem.processes().len();

    // Augmented layout: [q, integral_0, ..., integral_{I-1}].
    let mut y0 = alloc::vec![0.0; dim * (n_proc + 1)];
    y0[..dim].copy_from_slice(q0);

    let rhs = |y: &[f64], dy: &mut [f64]| {
        let q = &y[..dim];
        dy.fill(0.0);
        let mut scratch = alloc::vec![0.0; dim];
        for (i, p) in problem.processes().iter().enumerate() {
            p.eval(q, &mut scratch);
            let off = dim * (i + 1);
            for j in 0..dim {
                dy[j] += scratch[j];
            }
            dy[off..off + dim].copy_from_slice(&scratch);
        }
    };

    let (y_end, stats) = integrate_adaptive(&rhs, &y0, horizon, tol)?;
    let q_end = y_end[..dim].to_vec();
    let process_integrals = (0..n_proc)
        .map(|i| y_end[dim * (i + 1)..dim * (i + 2)].to_vec())
        .collect();
    Ok(SolveResult {
        q_end,
        process_integrals,
        stats,
    })
}

/// Exact-to-tolerance solve of the one-process ODE `dq/dt = X_i(q)` from
/// `q_in` over `dt`.
pub fn process_solve(
    process: &ProcessModel,
    q_in: &[f64],
    dt: f64,
    tol: Tolerances,
) -> crate::Result<Vec<f64>> {
    let rhs = |y: &[f64], dy: &mut [f64]| process.eval(y, dy);
    let (q_end, _) = integrate_adaptive(&rhs, q_in, dt, tol)?;
    Ok(q_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{abs, max_norm};
    use libm::exp;

    fn linear_pair(alpha: f64, beta: f64) -> ProblemSpec {
        let a = ProcessModel::scalar_with_jacobian("A", move |q| alpha * q, move |_| alpha);
        let b = ProcessModel::scalar_with_jacobian("B", move |q| beta * q, move |_| beta);
        ProblemSpec::new(alloc::vec![a, b], 1, alloc::vec![1.0]).unwrap()
    }

    #[test]
    fn total_rhs_sums_processes() {
        let a = ProcessModel::scalar("A", |_| 2.0);
        let b = ProcessModel::scalar("B", |q| -q);
        let p = ProblemSpec::new(alloc::vec![a, b], 1, alloc::vec![1.0]).unwrap();
        assert_eq!(eval_total_rhs(&p, &[1.0]).unwrap(), alloc::vec![1.0]);
    }

    #[test]
    fn total_rhs_linear() {
        let p = linear_pair(-1.0, -2.0);
        assert_eq!(eval_total_rhs(&p, &[1.0]).unwrap(), alloc::vec![-3.0]);
    }

    #[test]
    fn total_rhs_dimension_mismatch() {
        let p = linear_pair(-1.0, -2.0);
        assert!(eval_total_rhs(&p, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn reference_solve_exponential_decay() {
        let x = ProcessModel::scalar("X", |q| -q);
        let p = ProblemSpec::new(alloc::vec![x], 1, alloc::vec![1.0]).unwrap();
        let r = reference_solve(&p, &[1.0], 1.0, Tolerances::default()).unwrap();
        assert!(abs(r.q_end[0] - exp(-1.0)) < 1e-10);
    }

    #[test]
    fn reference_solve_zero_horizon_is_identity() {
        let p = linear_pair(-1.0, -2.0);
        let r = reference_solve(&p, &[1.0], 0.0, Tolerances::default()).unwrap();
        assert_eq!(r.q_end, alloc::vec![1.0]);
        assert_eq!(r.process_integrals[0], alloc::vec![0.0]);
        assert_eq!(r.process_integrals[1], alloc::vec![0.0]);
    }

    #[test]
    fn linear_pair_integral_decomposition() {
        let (alpha, beta) = (-1.0, -2.0);
        let p = linear_pair(alpha, beta);
        let r = reference_solve(&p, &[1.0], 0.03, Tolerances::default()).unwrap();
        let q_end = exp(-0.09);
        assert!(abs(r.q_end[0] - q_end) < 1e-12);
        let total = q_end - 1.0;
        assert!(abs(r.process_integrals[0][0] - alpha / (alpha + beta) * total) < 1e-12);
        assert!(abs(r.process_integrals[1][0] - beta / (alpha + beta) * total) < 1e-12);
    }

    #[test]
    fn quadrature_identity() {
        let tol = Tolerances::default();
        let p = linear_pair(-1.0, -2.0);
        let r = reference_solve(&p, &[1.0], 0.7, tol).unwrap();
        let mut defect = r.q_end[0] - 1.0;
        for integral in &r.process_integrals {
            defect -= integral[0];
        }
        assert!(abs(defect) <= 10.0 * tol.abs * p.dim() as f64);
    }

    #[test]
    fn process_solve_matches_closed_forms() {
        let tol = Tolerances::default();
        let b = ProcessModel::scalar("B", |q| -q);
        let out = process_solve(&b, &[1.0], 0.01, tol).unwrap();
        assert!(abs(out[0] - exp(-0.01)) < 1e-12);

        let a = ProcessModel::scalar("A", |_| 2.0);
        let out = process_solve(&a, &[1.0], 0.1, tol).unwrap();
        assert!(abs(out[0] - 1.2) < 1e-12);

        let out = process_solve(&a, &[1.0], 0.0, tol).unwrap();
        assert_eq!(out, alloc::vec![1.0]);
    }

    #[test]
    fn tolerance_monotonicity_on_linear_decay() {
        let x = ProcessModel::scalar("X", |q| -q);
        let p = ProblemSpec::new(alloc::vec![x], 1, alloc::vec![1.0]).unwrap();
        let exact = exp(-1.0);
        let mut prev_err = f64::INFINITY;
        for rel in [1e-6, 1e-8, 1e-10, 1e-12] {
            let tol = Tolerances { rel, abs: rel * 1e-2 };
            let r = reference_solve(&p, &[1.0], 1.0, tol).unwrap();
            let err = abs(r.q_end[0] - exact);
            assert!(err <= prev_err * 1.5 + 1e-15, "rel={rel} err={err}");
            prev_err = err;
        }
    }

    #[test]
    fn process_solve_agrees_with_reference_on_single_process() {
        let tol = Tolerances::default();
        let mk = || ProcessModel::scalar("X", |q: f64| -q * q);
        let p = ProblemSpec::new(alloc::vec![mk()], 1, alloc::vec![1.0]).unwrap();
        let r = reference_solve(&p, &[1.0], 0.5, tol).unwrap();
        let s = process_solve(&mk(), &[1.0], 0.5, tol).unwrap();
        assert!(abs(r.q_end[0] - s[0]) < 2.0 * (tol.abs + tol.rel));
    }

    #[test]
    fn fd_jacobian_matches_analytic() {
        let b = ProcessModel::scalar_with_jacobian("B", |q| -q * q, |q| -2.0 * q);
        let q = [0.7];
        let analytic = b.jacobian_matrix(&q);
        let mut fd = alloc::vec![0.0; 1];
        b.fd_jacobian(&q, &mut fd);
        assert!(max_norm(&[analytic[0] - fd[0]]) < 1e-8);
    }

    #[test]
    fn tight_tolerance_rejected_below_eps() {
        let p = linear_pair(-1.0, -2.0);
        let tol = Tolerances { rel: 1e-17, abs: 1e-18 };
        assert!(reference_solve(&p, &[1.0], 1.0, tol).is_err());
    }
}
