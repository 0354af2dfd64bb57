//! Right-hand side evaluation and deterministic fixed-step integration.
//!
//! Every row of the right-hand side is summed sequentially in ascending
//! column order with compensated summation. Rows may be evaluated in
//! parallel, which therefore never changes a single bit of the output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{CheckResult, DiagnosticsRecord, RecordContext};
use crate::ensemble::{diameter_of, lp_norm, FrequencyState, FrequencyVector, PhaseState, TailModel};
use crate::error::{Error, Result};
use crate::summation::NeumaierSum;
use crate::topology::CouplingMatrix;

/// Rows are evaluated on the rayon pool from this truncation upward.
const PARALLEL_ROWS_THRESHOLD: usize = 64;

/// Default bound on `‖Θ̇‖_∞` that counts as an equilibrium.
pub const DEFAULT_EQUILIBRIUM_TOL: f64 = 1e-6;

/// Default fraction of the stability bound used as the step.
pub const DEFAULT_STEP_SAFETY: f64 = 0.1;

/// Relative slack granted to the Lipschitz inequalities.
const LIPSCHITZ_SLACK: f64 = 1.0 / 1_073_741_824.0; // 2^-30

/// Evaluation kernel for the truncated first-order system.
#[derive(Debug, Clone)]
enum Kernel {
    /// Dense leading block, row-major.
    Block(Vec<f64>),
    /// Sender weights `κ_1..κ_N`; evaluated through the weighted centroid.
    Sender(Vec<f64>),
}

/// The truncated vector field `θ ↦ ν + Σ_{j≤N} κ_ij sin(θ_j − θ_i)`, with
/// the coupling block and frozen-tail masses precomputed.
#[derive(Debug, Clone)]
pub struct VectorField {
    kernel: Kernel,
    nu: Vec<f64>,
    /// `(mass_i, tail_phase)` for a frozen tail.
    frozen: Option<(Vec<f64>, f64)>,
}

impl VectorField {
    /// Builds the field for `n` oscillators. Sender networks use the O(N)
    /// centroid kernel unless `force_direct` is set.
    pub fn new(
        k: &CouplingMatrix,
        nu: &FrequencyVector,
        n: usize,
        tail_model: TailModel,
        force_direct: bool,
    ) -> Result<Self> {
        nu.check_len(n)?;
        let kernel = match k.sender_weights() {
            Some(kappa) if !force_direct => Kernel::Sender(kappa.prefix(n)),
            _ => Kernel::Block(k.block(n)),
        };
        let frozen = match tail_model {
            TailModel::Dropped => None,
            TailModel::Frozen { tail_phase } => {
                let block_rows = k.block_row_sums(n);
                let mass = (1..=n)
                    .map(|i| (k.row_sum(i) - block_rows[i - 1]).max(0.0))
                    .collect();
                Some((mass, tail_phase))
            }
        };
        Ok(Self {
            kernel,
            nu: nu.to_vec(n),
            frozen,
        })
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Writes `Θ̇` into `out`.
    pub fn eval(&self, theta: &[f64], out: &mut [f64]) {
        let n = self.nu.len();
        debug_assert_eq!(theta.len(), n);
        match &self.kernel {
            Kernel::Block(block) => {
                let row = |(i, slot): (usize, &mut f64)| {
                    let th_i = theta[i];
                    let mut acc = NeumaierSum::new();
                    acc.add(self.nu[i]);
                    for (kij, th_j) in block[i * n..(i + 1) * n].iter().zip(theta) {
                        acc.add(kij * (th_j - th_i).sin());
                    }
                    *slot = acc.value();
                };
                if n >= PARALLEL_ROWS_THRESHOLD {
                    out.par_iter_mut().enumerate().for_each(row);
                } else {
                    out.iter_mut().enumerate().for_each(row);
                }
            }
            Kernel::Sender(kappa) => {
                let (s_re, s_im) = centroid(kappa, theta);
                let reference = theta[0];
                for (i, slot) in out.iter_mut().enumerate() {
                    let (sin_i, cos_i) = (theta[i] - reference).sin_cos();
                    let mut acc = NeumaierSum::new();
                    acc.add(self.nu[i]);
                    acc.add(s_im * cos_i);
                    acc.add(-s_re * sin_i);
                    *slot = acc.value();
                }
            }
        }
        if let Some((mass, tail_phase)) = &self.frozen {
            for ((slot, m), th) in out.iter_mut().zip(mass).zip(theta) {
                *slot += m * (tail_phase - th).sin();
            }
        }
    }

    pub fn eval_vec(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        self.eval(theta, &mut out);
        out
    }
}

/// `Σ κ_k e^{i(θ_k − θ_1)}`, compensated, relative to the first phase so that
/// coincident phases give an exactly real centroid.
fn centroid(kappa: &[f64], theta: &[f64]) -> (f64, f64) {
    let reference = theta[0];
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for (k, th) in kappa.iter().zip(theta) {
        let (s, c) = (th - reference).sin_cos();
        re.add(k * c);
        im.add(k * s);
    }
    (re.value(), im.value())
}

/// `f_i = ν_i + Σ_{j≤N} κ_ij sin(θ_j − θ_i)` by direct double summation.
pub fn rhs(k: &CouplingMatrix, nu: &FrequencyVector, theta: &PhaseState) -> Result<Vec<f64>> {
    let field = VectorField::new(k, nu, theta.truncation(), theta.tail_model(), true)?;
    Ok(field.eval_vec(theta.phases()))
}

/// Sender right-hand side through the weighted centroid `S = Σ κ_k e^{iθ_k}`:
/// `f_i = ν_i + Im(S e^{-iθ_i})`, in O(N).
pub fn rhs_sender_fast(k: &CouplingMatrix, nu: &FrequencyVector, theta: &PhaseState) -> Result<Vec<f64>> {
    if !k.is_sender() {
        return Err(Error::WrongFamily {
            operation: "rhs_sender_fast",
            required: "sender",
        });
    }
    let field = VectorField::new(k, nu, theta.truncation(), theta.tail_model(), false)?;
    Ok(field.eval_vec(theta.phases()))
}

/// One classical Runge–Kutta step of `ẏ = f(y)`.
pub fn rk4_step(y: &[f64], h: f64, mut f: impl FnMut(&[f64], &mut [f64])) -> Vec<f64> {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(&tmp, &mut k4);
    (0..n)
        .map(|i| y[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
        .collect()
}

/// Advances `theta` by one RK4 step of size `h`, using the centroid kernel
/// on sender networks.
pub fn step_rk4(k: &CouplingMatrix, nu: &FrequencyVector, theta: &PhaseState, h: f64) -> Result<PhaseState> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("step", format!("must be finite and > 0, got {h}")));
    }
    let field = VectorField::new(k, nu, theta.truncation(), theta.tail_model(), false)?;
    let next = rk4_step(theta.phases(), h, |y, out| field.eval(y, out));
    Ok(theta.advanced(next, theta.time() + h))
}

fn require_sender(k: &CouplingMatrix, operation: &'static str) -> Result<()> {
    k.sender_weights()
        .map(|_| ())
        .ok_or(Error::WrongFamily {
            operation,
            required: "sender",
        })
}

/// `ω_i(0) = ν_i + Σ_j κ_j sin(θ_j^in − θ_i^in)`: the first-order field at the
/// initial configuration.
pub fn second_order_init(k: &CouplingMatrix, nu: &FrequencyVector, theta_in: &PhaseState) -> Result<FrequencyState> {
    require_sender(k, "second_order_init")?;
    let omegas = rhs_sender_fast(k, nu, theta_in)?;
    FrequencyState::new(omegas, theta_in.time())
}

/// `ω̇_i = Σ_j κ_j cos(θ_i − θ_j)(ω_j − ω_i)`.
pub fn second_order_rhs(k: &CouplingMatrix, theta: &PhaseState, omega: &FrequencyState) -> Result<Vec<f64>> {
    require_sender(k, "second_order_rhs")?;
    let n = theta.truncation();
    if omega.omegas.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: omega.omegas.len(),
        });
    }
    let kappa = k.sender_weights().expect("checked").prefix(n);
    let mut out = vec![0.0; n];
    omega_dot(&kappa, theta.phases(), &omega.omegas, &mut out);
    Ok(out)
}

fn omega_dot(kappa: &[f64], theta: &[f64], omega: &[f64], out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = NeumaierSum::new();
        for j in 0..theta.len() {
            acc.add(kappa[j] * (theta[i] - theta[j]).cos() * (omega[j] - omega[i]));
        }
        *slot = acc.value();
    }
}

/// Integration method. Only fixed-step classical RK4 is provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4Fixed,
}

/// Step size and horizon of a fixed-step run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t_end: f64,
    pub method: Method,
    pub step_safety: f64,
    pub steps: usize,
}

impl IntegratorConfig {
    /// `safety / (2‖K‖_{∞,1} + ‖𝒱‖_∞)`; infinite when both vanish.
    pub fn step_bound(k_inf: f64, nu_sup: f64, safety: f64) -> f64 {
        safety / (2.0 * k_inf + nu_sup)
    }

    /// Validates or derives the step. An explicit step must respect the
    /// bound; an automatic one takes the bound itself. Either way the step is
    /// then shrunk so that it divides `t_end` exactly.
    pub fn new(step: Option<f64>, t_end: f64, step_safety: f64, k_inf: f64, nu_sup: f64) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::invalid("t_end", format!("must be finite and > 0, got {t_end}")));
        }
        if !(step_safety > 0.0 && step_safety <= 1.0) {
            return Err(Error::invalid("step_safety", format!("must lie in (0,1], got {step_safety}")));
        }
        let bound = Self::step_bound(k_inf, nu_sup, step_safety);
        let h = match step {
            Some(h) if !(h.is_finite() && h > 0.0) => {
                return Err(Error::invalid("step", format!("must be finite and > 0, got {h}")))
            }
            Some(h) if h > bound * (1.0 + 1e-12) => {
                return Err(Error::Validation(format!(
                    "step {h} exceeds the stability bound {bound} = {step_safety}/(2·{k_inf} + {nu_sup})"
                )))
            }
            Some(h) => h,
            None if bound.is_finite() => bound,
            None => t_end / 100.0,
        };
        let h = h.min(t_end);
        let ratio = t_end / h;
        let rounded = ratio.round();
        let steps = if (ratio - rounded).abs() <= 1e-9 * rounded {
            rounded as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(Self {
            step: t_end / steps as f64,
            t_end,
            method: Method::Rk4Fixed,
            step_safety,
            steps,
        })
    }

    /// Time of the `k`-th grid point; the last one is exactly `t_end`.
    pub fn time_at(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.step
        }
    }
}

/// Everything needed to march one trajectory.
#[derive(Debug, Clone)]
pub struct Problem {
    pub topology: CouplingMatrix,
    pub nu: FrequencyVector,
    pub initial: PhaseState,
    pub integrator: IntegratorConfig,
    pub sample_stride: usize,
    pub equilibrium_tol: f64,
    pub second_order: bool,
    /// 1-based index tuples whose cross ratios are recorded.
    pub cross_ratio_tuples: Vec<[usize; 4]>,
}

impl Problem {
    /// A first-order problem with the automatic step and default settings.
    pub fn new(topology: CouplingMatrix, nu: FrequencyVector, initial: PhaseState, t_end: f64) -> Result<Self> {
        let n = initial.truncation();
        let integrator = IntegratorConfig::new(
            None,
            t_end,
            DEFAULT_STEP_SAFETY,
            topology.norm_inf_one(),
            nu.sup_norm(n),
        )?;
        Ok(Self {
            topology,
            nu,
            initial,
            integrator,
            sample_stride: 1,
            equilibrium_tol: DEFAULT_EQUILIBRIUM_TOL,
            second_order: false,
            cross_ratio_tuples: Vec::new(),
        })
    }

    /// Replaces the step, re-validating it against the stability bound.
    pub fn with_step(mut self, step: f64) -> Result<Self> {
        let n = self.initial.truncation();
        self.integrator = IntegratorConfig::new(
            Some(step),
            self.integrator.t_end,
            self.integrator.step_safety,
            self.topology.norm_inf_one(),
            self.nu.sup_norm(n),
        )?;
        Ok(self)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn second_order(mut self) -> Self {
        self.second_order = true;
        self
    }

    pub fn with_cross_ratios(mut self, tuples: Vec<[usize; 4]>) -> Self {
        self.cross_ratio_tuples = tuples;
        self
    }
}

/// Sampled output of [`integrate`].
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub omegas: Option<Vec<FrequencyState>>,
    pub frequencies: FrequencyVector,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub step: f64,
    /// `ε_tail(N)`: per-time-unit bound on the dropped coupling.
    pub tail_bound: f64,
    /// `ε_tail(N) · t_end`.
    pub tail_certificate: f64,
    /// Final `‖Θ̇‖_∞` below the equilibrium tolerance.
    pub equilibrium: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last_state(&self) -> &PhaseState {
        self.states.last().expect("trajectories hold at least the initial sample")
    }
}

/// Fixed-step march from `t = 0` to `t_end`, sampling every `sample_stride`
/// steps (the final step is always sampled).
pub fn integrate(problem: &Problem) -> Result<Trajectory> {
    if problem.sample_stride == 0 {
        return Err(Error::Config("sample_stride must be ≥ 1".into()));
    }
    if !(problem.equilibrium_tol.is_finite() && problem.equilibrium_tol > 0.0) {
        return Err(Error::Config("equilibrium_tol must be finite and > 0".into()));
    }
    let k = &problem.topology;
    let n = problem.initial.truncation();
    let cfg = problem.integrator;
    let field = VectorField::new(k, &problem.nu, n, problem.initial.tail_model(), false)?;
    let ctx = RecordContext::new(k, n, &problem.cross_ratio_tuples)?;
    let tail_bound = k.tail_bound(n);

    let capacity = cfg.steps / problem.sample_stride + 2;
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    let mut records = Vec::with_capacity(capacity);
    let mut omegas_out = Vec::new();

    let mut theta = problem.initial.phases().to_vec();

    if problem.second_order {
        if !matches!(problem.initial.tail_model(), TailModel::Dropped) {
            return Err(Error::Config("second-order runs require a dropped tail".into()));
        }
        let kappa = k
            .sender_weights()
            .ok_or(Error::WrongFamily {
                operation: "second-order integration",
                required: "sender",
            })?
            .prefix(n);
        let mut omega = field.eval_vec(&theta);
        let mut y: Vec<f64> = theta.iter().chain(&omega).copied().collect();
        let stacked = |y: &[f64], out: &mut [f64]| {
            let (th, om) = y.split_at(n);
            let (dth, dom) = out.split_at_mut(n);
            dth.copy_from_slice(om);
            omega_dot(&kappa, th, om, dom);
        };
        for step in 0..=cfg.steps {
            if step > 0 {
                y = rk4_step(&y, cfg.step, stacked);
            }
            if step % problem.sample_stride == 0 || step == cfg.steps {
                let t = cfg.time_at(step);
                theta = y[..n].to_vec();
                omega = y[n..].to_vec();
                let state = problem.initial.advanced(theta.clone(), t);
                records.push(ctx.record(&state, &omega, Some(diameter_of(&omega)), tail_bound));
                omegas_out.push(FrequencyState {
                    omegas: omega.clone(),
                    time: t,
                });
                times.push(t);
                states.push(state);
            }
        }
    } else {
        let mut dtheta = vec![0.0; n];
        for step in 0..=cfg.steps {
            if step > 0 {
                theta = rk4_step(&theta, cfg.step, |y, out| field.eval(y, out));
            }
            if step % problem.sample_stride == 0 || step == cfg.steps {
                let t = cfg.time_at(step);
                field.eval(&theta, &mut dtheta);
                let state = problem.initial.advanced(theta.clone(), t);
                records.push(ctx.record(&state, &dtheta, None, tail_bound));
                times.push(t);
                states.push(state);
            }
        }
    }

    let equilibrium = records
        .last()
        .map(|r| r.rhs_linf < problem.equilibrium_tol)
        .unwrap_or(false);
    Ok(Trajectory {
        sample_times: times,
        states,
        omegas: problem.second_order.then_some(omegas_out),
        frequencies: problem.nu.clone(),
        diagnostics: records,
        step: cfg.step,
        tail_bound,
        tail_certificate: tail_bound * cfg.t_end,
        equilibrium,
    })
}

/// `‖ℱ(Θ) − ℱ(Θ̃)‖_p ≤ 2‖K_N‖_{p,1}‖Θ − Θ̃‖_p` and `‖ℱ(Θ)‖_p ≤ ‖𝒱‖_p + ‖K_N‖_{p,1}`
/// on the truncated system, with relative slack `2^-30`.
///
/// The constants are those of the leading `N×N` block, which is the matrix
/// the truncated field actually uses; they are finite even for sender
/// networks, whose infinite `‖K‖_{p,1}` diverges for `p < ∞`.
pub fn lipschitz_check(
    k: &CouplingMatrix,
    nu: &FrequencyVector,
    theta_a: &PhaseState,
    theta_b: &PhaseState,
    p: f64,
) -> CheckResult {
    let mut check = CheckResult::new(format!("lipschitz_p{}", p_label(p)));
    let n = theta_a.truncation();
    if theta_b.truncation() != n {
        check.note(format!("truncations differ: {n} vs {}", theta_b.truncation()));
        check.observe(-1.0);
        return check.finish();
    }
    let (fa, fb) = match (rhs(k, nu, theta_a), rhs(k, nu, theta_b)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            check.note(e.to_string());
            check.observe(-1.0);
            return check.finish();
        }
    };
    let k_p = k.block_norm_p_one(n, p);
    let slack = 1.0 + LIPSCHITZ_SLACK;

    let df: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| a - b).collect();
    let dtheta: Vec<f64> = theta_a.phases().iter().zip(theta_b.phases()).map(|(a, b)| a - b).collect();
    let lhs = lp_norm(&df, p);
    let bound = 2.0 * k_p * lp_norm(&dtheta, p);
    check.observe(bound * slack - lhs);
    check.measure("lhs", lhs);
    check.measure("bound", bound);

    let nu_p = lp_norm(&nu.to_vec(n), p);
    for f in [&fa, &fb] {
        check.observe((nu_p + k_p) * slack - lp_norm(f, p));
    }
    check.finish()
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// Checks the first- and second-derivative bounds at every sample:
///
/// * `|θ̇_i| ≤ ‖𝒱‖_∞ + ‖K‖_{∞,1}` and row-wise `|θ̇_i| ≤ |ν_i| + Σ_j κ_ij`,
/// * `|θ̈_i| ≤ 2‖K‖_{∞,1}(‖𝒱‖_∞ + ‖K‖_{∞,1})` and row-wise
///   `|θ̈_i| ≤ 2(‖𝒱‖_∞ + ‖K‖_{∞,1}) Σ_j κ_ij`,
/// * `|θ̇_i − θ̇_j| ≤ D(𝒱) + 2‖K‖_{∞,1}`,
/// * `|θ̈_i − θ̈_j| ≤ 2‖K‖_{∞,1}(D(𝒱) + 2‖K‖_{∞,1})`.
///
/// Second derivatives use the analytic expression
/// `θ̈_i = Σ_j κ_ij cos(θ_j − θ_i)(θ̇_j − θ̇_i)`, never finite differences.
pub fn derivative_bounds_check(trajectory: &Trajectory, k: &CouplingMatrix, nu: &FrequencyVector) -> CheckResult {
    let mut check = CheckResult::new("derivative_bounds");
    if trajectory.len() < 3 {
        check.note("need at least three samples");
        return check.not_applicable();
    }
    let n = trajectory.states[0].truncation();
    let field = match VectorField::new(k, nu, n, trajectory.states[0].tail_model(), true) {
        Ok(f) => f,
        Err(e) => {
            check.note(e.to_string());
            check.observe(-1.0);
            return check.finish();
        }
    };
    let block = k.block(n);
    let k_inf = k.norm_inf_one();
    let nu_sup = nu.sup_norm(n);
    let d_nu = nu.diameter(n);
    let rows: Vec<f64> = (1..=n).map(|i| k.row_sum(i)).collect();
    let nus = nu.to_vec(n);

    let b1 = nu_sup + k_inf;
    let b2 = 2.0 * k_inf * (nu_sup + k_inf);
    let b3 = d_nu + 2.0 * k_inf;
    let b4 = 2.0 * k_inf * (d_nu + 2.0 * k_inf);
    // Rounding allowance: bounds can be tight (e.g. a lone oscillator).
    let tight = |bound: f64, value: f64| bound * (1.0 + 1e-12) + 1e-15 - value;

    let mut worst = [0.0f64; 4];
    for state in &trajectory.states {
        let th = state.phases();
        let d1 = field.eval_vec(th);
        let d2: Vec<f64> = (0..n)
            .map(|i| {
                let mut acc = NeumaierSum::new();
                for j in 0..n {
                    acc.add(block[i * n + j] * (th[j] - th[i]).cos() * (d1[j] - d1[i]));
                }
                acc.value()
            })
            .collect();
        for i in 0..n {
            check.observe(tight(b1, d1[i].abs()));
            check.observe(tight(nus[i].abs() + rows[i], d1[i].abs()));
            check.observe(tight(b2, d2[i].abs()));
            check.observe(tight(2.0 * (nu_sup + k_inf) * rows[i], d2[i].abs()));
            worst[0] = worst[0].max(d1[i].abs());
            worst[1] = worst[1].max(d2[i].abs());
        }
        let spread1 = diameter_of(&d1);
        let spread2 = diameter_of(&d2);
        check.observe(tight(b3, spread1));
        check.observe(tight(b4, spread2));
        worst[2] = worst[2].max(spread1);
        worst[3] = worst[3].max(spread2);
    }
    check.measure("max_first_derivative", worst[0]);
    check.measure("max_second_derivative", worst[1]);
    check.measure("max_pairwise_first", worst[2]);
    check.measure("max_pairwise_second", worst[3]);
    check.measure("bound_first", b1);
    check.measure("bound_second", b2);
    check.measure("bound_pairwise_first", b3);
    check.measure("bound_pairwise_second", b4);
    check.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::CheckStatus;
    use crate::topology::PositiveSequence;
    use std::f64::consts::FRAC_PI_2;

    fn half_sender() -> CouplingMatrix {
        CouplingMatrix::sender(PositiveSequence::explicit(vec![0.5, 0.5]).unwrap(), true)
    }

    fn state(v: &[f64]) -> PhaseState {
        PhaseState::new(v.to_vec()).unwrap()
    }

    const ZERO: FrequencyVector = FrequencyVector::Homogeneous(0.0);

    #[test]
    fn direct_rhs_examples() {
        let f = rhs(&half_sender(), &ZERO, &state(&[0.0, FRAC_PI_2])).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-16 && (f[1] + 0.5).abs() < 1e-16);
        let uf = CouplingMatrix::uniform_finite(2, 2.0).unwrap();
        let nu = FrequencyVector::per_index(vec![1.0, -1.0]).unwrap();
        assert_eq!(rhs(&uf, &nu, &state(&[0.0, FRAC_PI_2])).unwrap(), vec![2.0, -2.0]);
        let ps = CouplingMatrix::product_summable(PositiveSequence::dyadic());
        assert!(rhs(&ps, &ZERO, &state(&[0.3; 5])).unwrap().iter().all(|v| *v == 0.0));
        let bad = FrequencyVector::per_index(vec![1.0; 3]).unwrap();
        assert!(matches!(rhs(&uf, &bad, &state(&[0.0, 1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fast_sender_examples() {
        let f = rhs_sender_fast(&half_sender(), &ZERO, &state(&[0.0, FRAC_PI_2])).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-16 && (f[1] + 0.5).abs() < 1e-16);
        let f = rhs_sender_fast(&half_sender(), &ZERO, &state(&[1.2, 1.2])).unwrap();
        assert_eq!(f, vec![0.0, 0.0]);
        let single = CouplingMatrix::sender(PositiveSequence::explicit(vec![1.0]).unwrap(), true);
        let f = rhs_sender_fast(&single, &ZERO, &state(&[0.0, 1.0])).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[1] + 0.841_470_984_807_896_5).abs() < 1e-15);
        let uf = CouplingMatrix::uniform_finite(2, 1.0).unwrap();
        assert!(matches!(rhs_sender_fast(&uf, &ZERO, &state(&[0.0, 1.0])), Err(Error::WrongFamily { .. })));
    }

    #[test]
    fn rk4_examples() {
        let eq = state(&[0.4; 3]);
        let next = step_rk4(&half_sender(), &ZERO, &state(&[0.4, 0.4]), 0.05).unwrap();
        assert_eq!(next.phases(), &[0.4, 0.4]);
        assert_eq!(next.time(), 0.05);
        let _ = eq;

        let lone = CouplingMatrix::uniform_finite(1, 0.0).unwrap();
        let next = step_rk4(&lone, &FrequencyVector::Homogeneous(0.75), &state(&[0.0]), 0.25).unwrap();
        assert_eq!(next.phases(), &[0.75 * 0.25]);

        for h in [1e-3, 1e-4, 1e-5] {
            let next = step_rk4(&half_sender(), &ZERO, &state(&[0.0, FRAC_PI_2]), h).unwrap();
            assert!((next.phases()[0] / h - 0.5).abs() < 2.0 * h);
        }
    }

    #[test]
    fn second_order_examples() {
        let w = second_order_init(&half_sender(), &ZERO, &state(&[0.0, 0.0])).unwrap();
        assert_eq!(w.omegas, vec![0.0, 0.0]);
        let w = second_order_init(&half_sender(), &ZERO, &state(&[0.0, FRAC_PI_2])).unwrap();
        assert!((w.omegas[0] - 0.5).abs() < 1e-16 && (w.omegas[1] + 0.5).abs() < 1e-16);
        let single = CouplingMatrix::sender(PositiveSequence::explicit(vec![1.0]).unwrap(), true);
        let nu = FrequencyVector::per_index(vec![0.3, -0.3]).unwrap();
        let w = second_order_init(&single, &nu, &state(&[0.0, 0.0])).unwrap();
        assert_eq!(w.omegas, vec![0.3, -0.3]);

        let k = half_sender();
        let om = |v: &[f64]| FrequencyState::new(v.to_vec(), 0.0).unwrap();
        assert_eq!(second_order_rhs(&k, &state(&[0.1, 2.0]), &om(&[0.7, 0.7])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(second_order_rhs(&k, &state(&[0.0, 0.0]), &om(&[1.0, 0.0])).unwrap(), vec![-0.5, 0.5]);
        let q = second_order_rhs(&k, &state(&[0.0, FRAC_PI_2]), &om(&[1.0, 0.0])).unwrap();
        assert!(q.iter().all(|v| v.abs() < 1e-16));
        let uf = CouplingMatrix::uniform_finite(2, 1.0).unwrap();
        assert!(second_order_rhs(&uf, &state(&[0.0, 0.0]), &om(&[1.0, 0.0])).is_err());
        assert!(second_order_rhs(&k, &state(&[0.0, 0.0]), &om(&[1.0])).is_err());
    }

    #[test]
    fn step_rule() {
        let cfg = IntegratorConfig::new(None, 10.0, 0.1, 1.0, 0.0).unwrap();
        assert_eq!(cfg.step, 0.05);
        assert_eq!(cfg.steps, 200);
        assert!(matches!(
            IntegratorConfig::new(Some(0.2), 10.0, 0.1, 1.0, 0.0),
            Err(Error::Validation(_))
        ));
        let cfg = IntegratorConfig::new(Some(0.03), 1.0, 0.1, 1.0, 0.0).unwrap();
        assert_eq!(cfg.steps, 34);
        assert!(cfg.step <= 0.03);
        assert_eq!(cfg.time_at(cfg.steps), 1.0);
        let cfg = IntegratorConfig::new(None, 2.0, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(cfg.steps, 100);
    }

    #[test]
    fn lipschitz_examples() {
        let swap = CouplingMatrix::finite_embedded(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let a = state(&[0.0, 0.0]);
        let res = lipschitz_check(&swap, &ZERO, &a, &a, f64::INFINITY);
        assert_eq!(res.status, CheckStatus::Pass);
        let b = state(&[0.1, -0.1]);
        let res = lipschitz_check(&swap, &ZERO, &a, &b, f64::INFINITY);
        assert_eq!(res.status, CheckStatus::Pass);
        assert!((res.measured["lhs"] - 0.2f64.sin()).abs() < 1e-15);
        assert!((res.measured["bound"] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn derivative_bound_examples() {
        let lone = CouplingMatrix::uniform_finite(1, 0.0).unwrap();
        let problem = Problem::new(lone.clone(), FrequencyVector::Homogeneous(5.0), state(&[0.0]), 1.0).unwrap();
        let traj = integrate(&problem).unwrap();
        let res = derivative_bounds_check(&traj, &lone, &FrequencyVector::Homogeneous(5.0));
        assert_eq!(res.status, CheckStatus::Pass);
        assert_eq!(res.measured["max_first_derivative"], 5.0);
    }

    #[test]
    fn equilibria_stay_put() {
        let ps = CouplingMatrix::product_summable(PositiveSequence::dyadic());
        let problem = Problem::new(ps, ZERO, state(&[0.9; 12]), 20.0).unwrap();
        let traj = integrate(&problem).unwrap();
        assert!(traj.states.iter().all(|s| s.phases().iter().all(|v| *v == 0.9)));
        assert!(traj.equilibrium);
    }
}
