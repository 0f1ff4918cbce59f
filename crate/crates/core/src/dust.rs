//! Three-process dust life-cycle demo problems and the original-vs-revised
//! coupling comparison.
//!
//! Process naming follows the generic roles: `A` is emission (a source),
//! `B` is dry removal, `C` is turbulent mixing. In the surface regime of
//! interest, `A > 0`, `B < 0`, `C < 0`, and `dB/dq < 0`, which is the
//! setting where the revised coupling's dry-removal error is smaller in
//! magnitude than the original's.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::analysis::{lte_with_attribution, predict_leading_lte, state_at};
use crate::math;
use crate::ode::{ProblemSpec, ProcessModel, Tolerances};
use crate::scheme::{builtin_scheme, BuiltinKind};
use crate::Error;

/// Scalar (dim-1) dust problem: `A = E`, `B = -k_d q`,
/// `C = -k_m (q - q_bg)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarDustParams {
    /// Emission rate `E` (> 0).
    pub emission: f64,
    /// Dry removal rate `k_d` (> 0).
    pub removal_rate: f64,
    /// Mixing relaxation rate `k_m` (> 0).
    pub mixing_rate: f64,
    /// Background mixing ratio the mixing term relaxes toward (>= 0).
    pub background: f64,
    /// Initial mixing ratio.
    pub q_ic: f64,
}

impl Default for ScalarDustParams {
    fn default() -> Self {
        ScalarDustParams {
            emission: 2.0,
            removal_rate: 1.0,
            mixing_rate: 0.5,
            background: 0.0,
            q_ic: 1.0,
        }
    }
}

/// Vertical-column dust problem discretized into `layers` well-mixed
/// layers. Emission and deposition act on layer 1 (index 0); mixing is
/// eddy diffusion with no-flux boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnDustParams {
    pub layers: usize,
    /// Layer thickness (> 0).
    pub dz: f64,
    /// Emission mass flux into layer 1 (> 0); the tendency is `E / dz`.
    pub emission_flux: f64,
    /// Deposition velocity (> 0); removal tendency is `-v_d q_1 / dz`.
    pub deposition_velocity: f64,
    /// Eddy diffusivity `K` (> 0).
    pub diffusivity: f64,
    /// Uniform initial mixing ratio.
    pub q_ic: f64,
}

impl Default for ColumnDustParams {
    fn default() -> Self {
        ColumnDustParams {
            layers: 10,
            dz: 0.1,
            emission_flux: 0.2,
            deposition_velocity: 0.1,
            diffusivity: 0.02,
            q_ic: 1.0,
        }
    }
}

/// Builds the scalar three-process problem with analytic Jacobians.
pub fn make_scalar_dust_problem(p: ScalarDustParams) -> crate::Result<ProblemSpec> {
    if p.emission <= 0.0 || p.removal_rate <= 0.0 || p.mixing_rate <= 0.0 {
        return Err(Error::invalid("dust rates must be positive"));
    }
    if p.background < 0.0 {
        return Err(Error::invalid("background must be nonnegative"));
    }
    let e = p.emission;
    let kd = p.removal_rate;
    let km = p.mixing_rate;
    let bg = p.background;
    let a = ProcessModel::scalar_with_jacobian("A", move |_| e, |_| 0.0);
    let b = ProcessModel::scalar_with_jacobian("B", move |q| -kd * q, move |_| -kd);
    let c = ProcessModel::scalar_with_jacobian("C", move |q| -km * (q - bg), move |_| -km);
    ProblemSpec::new(alloc::vec![a, b, c], 1, alloc::vec![p.q_ic])
}

/// Builds the method-of-lines column problem. The diffusion operator's
/// rows sum to zero, so mixing alone conserves column mass.
pub fn make_column_dust_problem(p: ColumnDustParams) -> crate::Result<ProblemSpec> {
    if p.layers < 2 {
        return Err(Error::invalid("column needs at least 2 layers"));
    }
    if p.dz <= 0.0
        || p.emission_flux <= 0.0
        || p.deposition_velocity <= 0.0
        || p.diffusivity <= 0.0
    {
        return Err(Error::invalid("column parameters must be positive"));
    }
    let n = p.layers;
    let dz = p.dz;
    let emis = p.emission_flux / dz;
    let vd_over_dz = p.deposition_velocity / dz;
    let kdz2 = p.diffusivity / (dz * dz);

    let a = ProcessModel::new(
        "A",
        alloc::boxed::Box::new(move |_q: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            out[0] = emis;
        }),
    )
    .with_jacobian(alloc::boxed::Box::new(move |_q, out| out.fill(0.0)));

    let b = ProcessModel::new(
        "B",
        alloc::boxed::Box::new(move |q: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            out[0] = -vd_over_dz * q[0];
        }),
    )
    .with_jacobian(alloc::boxed::Box::new(move |q: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        let n = q.len();
        let _ = n;
        out[0] = -vd_over_dz;
    }));

    let c = ProcessModel::new(
        "C",
        alloc::boxed::Box::new(move |q: &[f64], out: &mut [f64]| {
            let n = q.len();
            for i in 0..n {
                let below = if i == 0 { q[0] } else { q[i - 1] };
                let above = if i == n - 1 { q[n - 1] } else { q[i + 1] };
                out[i] = kdz2 * (below - 2.0 * q[i] + above);
            }
        }),
    )
    .with_jacobian(alloc::boxed::Box::new(move |q: &[f64], out: &mut [f64]| {
        let n = q.len();
        out.fill(0.0);
        for i in 0..n {
            let mut diag = -2.0;
            if i == 0 || i == n - 1 {
                diag = -1.0;
            }
            out[i * n + i] = kdz2 * diag;
            if i > 0 {
                out[i * n + i - 1] = kdz2;
            }
            if i < n - 1 {
                out[i * n + i + 1] = kdz2;
            }
        }
    }));

    ProblemSpec::new(alloc::vec![a, b, c], n, alloc::vec![p.q_ic; n])
}

/// One `dt` entry of the comparison: bottom-layer dry-removal attribution
/// under the original and revised couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub dt: f64,
    pub lte_b_original: f64,
    pub lte_b_revised: f64,
    pub predicted_original: f64,
    pub predicted_revised: f64,
    /// |revised| / |original|.
    pub magnitude_ratio: f64,
    pub below_noise_floor: bool,
}

/// Comparison of the original and revised couplings on a three-process
/// dust problem, focused on the dry-removal (`B`) error in the bottom
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeComparisonReport {
    pub rows: Vec<CompareRow>,
    /// `|A - C|` at `q(t_n)` in the bottom layer (original-scheme error
    /// factor).
    pub factor_original: f64,
    /// `|-A - C|` at `q(t_n)` in the bottom layer (revised-scheme error
    /// factor).
    pub factor_revised: f64,
    /// State the factors were evaluated at.
    pub q_n: Vec<f64>,
    /// Index of the reported layer (0, the surface layer).
    pub bottom_layer: usize,
    pub noise_floor: f64,
}

impl SchemeComparisonReport {
    /// True when every sampled original-scheme attribution is negative.
    pub fn original_sign_negative(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| !r.below_noise_floor)
            .all(|r| r.lte_b_original < 0.0)
    }
}

/// Measures and predicts the bottom-layer `lte_B` for the original and
/// revised couplings at each step size.
pub fn compare_schemes_report(
    problem: &ProblemSpec,
    t_n: f64,
    dts: &[f64],
    tol: Tolerances,
) -> crate::Result<SchemeComparisonReport> {
    let names: Vec<String> = problem
        .processes()
        .iter()
        .map(|p| p.name().to_string())
        .collect();
    if names.len() != 3 {
        return Err(Error::invalid(
            "scheme comparison expects a three-process dust problem",
        ));
    }
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let original = builtin_scheme(BuiltinKind::EamOriginal, &name_refs)?;
    let revised = builtin_scheme(BuiltinKind::EamRevised, &name_refs)?;
    let b_stage = original
        .stages()
        .get(1)
        .ok_or_else(|| Error::Internal("missing B stage".into()))?
        .id
        .clone();
    let b_process = names[1].clone();
    let bottom = 0;

    let q_n = state_at(problem, t_n, tol)?;
    let noise_floor = 100.0 * (tol.abs + tol.rel * math::max_norm(&q_n));
    let a_val = problem.processes()[0].tendency(&q_n)[bottom];
    let c_val = problem.processes()[2].tendency(&q_n)[bottom];

    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let ori = lte_with_attribution(&original, problem, t_n, dt, tol)?;
        let rev = lte_with_attribution(&revised, problem, t_n, dt, tol)?;
        let lte_b_original = ori.per_stage[&b_stage][bottom];
        let lte_b_revised = rev.per_stage[&b_stage][bottom];
        let (_, pred_ori) = predict_leading_lte(&original, problem, &q_n, dt)?;
        let (_, pred_rev) = predict_leading_lte(&revised, problem, &q_n, dt)?;
        let below = math::abs(lte_b_original) < noise_floor;
        rows.push(CompareRow {
            dt,
            lte_b_original,
            lte_b_revised,
            predicted_original: pred_ori[&b_process][bottom],
            predicted_revised: pred_rev[&b_process][bottom],
            magnitude_ratio: math::abs(lte_b_revised) / math::abs(lte_b_original),
            below_noise_floor: below,
        });
    }
    Ok(SchemeComparisonReport {
        rows,
        factor_original: math::abs(a_val - c_val),
        factor_revised: math::abs(-a_val - c_val),
        q_n,
        bottom_layer: bottom,
        noise_floor,
    })
}
