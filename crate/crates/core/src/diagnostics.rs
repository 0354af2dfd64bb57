//! Observables and checks along trajectories.
//!
//! Observables (order parameters, potential, weighted sums, cross ratios)
//! are pure functions of a state. Checks consume a [`Trajectory`] and return
//! a [`CheckResult`]; a failed inequality is a result, never an error.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Trajectory, VectorField};
use crate::ensemble::{diameter_of, lp_norm, FrequencyVector, PhaseState, TailModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::summation::NeumaierSum;
use crate::topology::{CouplingMatrix, PositiveSequence};

/// Below this modulus the centroid phase is reported as undefined.
pub const R_FLOOR: f64 = 1e-9;
/// Minimum chordal distance between cross-ratio points.
pub const GAP_FLOOR: f64 = 1e-6;
/// Default tolerance of the asymptotic classification.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-3 * PI;
/// Default slack added to the practical-synchronization radius.
pub const DEFAULT_SYNC_SLACK: f64 = 0.05;
/// Default fraction of samples forming the final window.
pub const DEFAULT_SYNC_WINDOW: f64 = 0.2;
/// Margin below `π/2` that marks entry into the quarter arc.
pub const QUARTER_ARC_MARGIN: f64 = 0.05;
/// Initial coherence above which the final sine residual is enforced.
pub const DICHOTOMY_R_MIN: f64 = 1e-3;
/// Values below this are treated as rounding noise by the decay fits.
pub const DECAY_FIT_FLOOR: f64 = 1e-12;

/// Status of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Flagged,
    NotApplicable,
}

/// Result of a numerical check: the worst margin `bound − value` over all
/// observations (negative means violated) and any measured quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub worst_margin: f64,
    pub violations: usize,
    pub samples: usize,
    pub measured: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Pass,
            worst_margin: f64::INFINITY,
            violations: 0,
            samples: 0,
            measured: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Records one margin; NaN counts as a violation.
    pub fn observe(&mut self, margin: f64) {
        self.samples += 1;
        if !(margin >= 0.0) {
            self.violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    pub fn measure(&mut self, key: impl Into<String>, value: f64) {
        self.measured.insert(key.into(), value);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Pass iff no violations were observed.
    pub fn finish(mut self) -> Self {
        if self.status == CheckStatus::Pass && self.violations > 0 {
            self.status = CheckStatus::Fail;
        }
        self
    }

    pub fn not_applicable(mut self) -> Self {
        self.status = CheckStatus::NotApplicable;
        self
    }

    pub fn flagged(mut self) -> Self {
        self.status = CheckStatus::Flagged;
        self
    }

    pub fn failed(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self.status = CheckStatus::Fail;
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// `r e^{iφ} = Σ κ_k e^{iθ_k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    pub r: f64,
    /// `None` when `r < R_FLOOR`.
    pub phi: Option<f64>,
}

/// Order parameters with explicit weights `w_k` (one per oscillator).
pub fn order_parameters_weighted(theta: &[f64], weights: &[f64]) -> OrderParameters {
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for (w, th) in weights.iter().zip(theta) {
        let (s, c) = th.sin_cos();
        re.add(w * c);
        im.add(w * s);
    }
    let (re, im) = (re.value(), im.value());
    let r = re.hypot(im);
    OrderParameters {
        r,
        phi: (r >= R_FLOOR).then(|| im.atan2(re)),
    }
}

/// Order parameters weighted by the leading terms of `kappa`.
pub fn order_parameters(theta: &PhaseState, kappa: &PositiveSequence) -> OrderParameters {
    order_parameters_weighted(theta.phases(), &kappa.prefix(theta.truncation()))
}

/// `Σ κ_k sin²(θ_k − φ)`: zero exactly at the critical points of `r`.
pub fn sine_residual(theta: &[f64], weights: &[f64], phi: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    for (w, th) in weights.iter().zip(theta) {
        acc.add(w * (th - phi).sin().powi(2));
    }
    acc.value()
}

/// `P(Θ) = ½ Σ_{i≠j} κ_ij (1 − cos(θ_i − θ_j))` over the leading block.
pub fn potential(theta: &PhaseState, k: &CouplingMatrix) -> Result<f64> {
    if !k.is_symmetric_summable() {
        return Err(Error::WrongFamily {
            operation: "potential",
            required: "symmetric summable",
        });
    }
    let n = theta.truncation();
    Ok(potential_block(&k.block(n), theta.phases()))
}

fn potential_block(block: &[f64], theta: &[f64]) -> f64 {
    let n = theta.len();
    let mut acc = NeumaierSum::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc.add(block[i * n + j] * (1.0 - (theta[i] - theta[j]).cos()));
            }
        }
    }
    0.5 * acc.value()
}

/// `𝒞_ijkl = (z_i − z_k)/(z_i − z_j) · (z_j − z_l)/(z_k − z_l)`, `z = e^{iθ}`,
/// with 1-based indices and the default gap floor.
pub fn cross_ratio(theta: &PhaseState, i: usize, j: usize, k: usize, l: usize) -> Result<Complex64> {
    cross_ratio_with_floor(theta.phases(), [i, j, k, l], GAP_FLOOR)
}

/// Cross ratio of four unit-circle points.
///
/// Writing `z_a − z_b = 2i sin((θ_a − θ_b)/2) e^{i(θ_a+θ_b)/2}` the phase
/// factors cancel exactly, leaving a ratio of half-angle sines. This is the
/// same complex number as the defining quotient (it is real because four
/// concyclic points have a real cross ratio) but avoids the cancellation in
/// `z_a − z_b` for nearby points.
pub fn cross_ratio_with_floor(theta: &[f64], idx: [usize; 4], gap_floor: f64) -> Result<Complex64> {
    let n = theta.len();
    for (pos, &a) in idx.iter().enumerate() {
        if a == 0 || a > n {
            return Err(Error::invalid("indices", format!("index {a} outside 1..={n}")));
        }
        if idx[..pos].contains(&a) {
            return Err(Error::invalid("indices", format!("index {a} repeated")));
        }
    }
    let th = idx.map(|a| theta[a - 1]);
    let half_sin = |a: usize, b: usize| ((th[a] - th[b]) / 2.0).sin();
    let mut gap = f64::INFINITY;
    for a in 0..4 {
        for b in (a + 1)..4 {
            gap = gap.min(2.0 * half_sin(a, b).abs());
        }
    }
    if !(gap >= gap_floor) {
        return Err(Error::DegenerateTuple {
            indices: idx,
            gap,
            floor: gap_floor,
        });
    }
    let value = (half_sin(0, 2) * half_sin(1, 3)) / (half_sin(0, 1) * half_sin(2, 3));
    Ok(Complex64::new(value, 0.0))
}

/// All 4-element index tuples `i<j<k<l` of `1..=n`.
pub fn all_tuples(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            for k in j + 1..=n {
                for l in k + 1..=n {
                    out.push([i, j, k, l]);
                }
            }
        }
    }
    out
}

/// One recorded cross ratio; `value` is absent when the tuple is degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossRatioSample {
    pub indices: [usize; 4],
    pub value: Option<[f64; 2]>,
}

/// Measurements at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub d_theta: f64,
    pub d_omega: Option<f64>,
    pub r: f64,
    pub phi: Option<f64>,
    pub potential: Option<f64>,
    pub weighted_sum: Option<f64>,
    pub cross_ratios: Option<Vec<CrossRatioSample>>,
    pub rhs_l2: f64,
    pub rhs_linf: f64,
    pub tail_cert: f64,
}

/// Precomputed weights and blocks used to fill [`DiagnosticsRecord`]s.
///
/// * `r, φ` use the sender weights on sender networks and uniform weights
///   `1/N` otherwise.
/// * `S` uses the sender weights on sender networks and unit weights on
///   symmetric networks (both are constants of motion there); it is absent
///   for other families.
/// * `P` is recorded only for symmetric summable networks.
#[derive(Debug, Clone)]
pub struct RecordContext {
    order_weights: Vec<f64>,
    sum_weights: Option<Vec<f64>>,
    potential_block: Option<Vec<f64>>,
    tuples: Vec<[usize; 4]>,
}

impl RecordContext {
    pub fn new(k: &CouplingMatrix, n: usize, tuples: &[[usize; 4]]) -> Result<Self> {
        for t in tuples {
            for (pos, &a) in t.iter().enumerate() {
                if a == 0 || a > n || t[..pos].contains(&a) {
                    return Err(Error::Config(format!(
                        "cross-ratio tuple {t:?} must hold distinct indices in 1..={n}"
                    )));
                }
            }
        }
        let (order_weights, sum_weights) = match k.sender_weights() {
            Some(kappa) => {
                let w = kappa.prefix(n);
                (w.clone(), Some(w))
            }
            None => (
                vec![1.0 / n as f64; n],
                k.symmetric().then(|| vec![1.0; n]),
            ),
        };
        Ok(Self {
            order_weights,
            sum_weights,
            potential_block: k.is_symmetric_summable().then(|| k.block(n)),
            tuples: tuples.to_vec(),
        })
    }

    pub fn record(&self, state: &PhaseState, dtheta: &[f64], d_omega: Option<f64>, tail_bound: f64) -> DiagnosticsRecord {
        let th = state.phases();
        let op = order_parameters_weighted(th, &self.order_weights);
        let weighted_sum = self.sum_weights.as_ref().map(|w| {
            let mut acc = NeumaierSum::new();
            for (wk, x) in w.iter().zip(th) {
                acc.add(wk * x);
            }
            acc.value()
        });
        let cross_ratios = (!self.tuples.is_empty()).then(|| {
            self.tuples
                .iter()
                .map(|&indices| CrossRatioSample {
                    indices,
                    value: cross_ratio_with_floor(th, indices, GAP_FLOOR).ok().map(|c| [c.re, c.im]),
                })
                .collect()
        });
        DiagnosticsRecord {
            t: state.time(),
            d_theta: state.diameter(),
            d_omega,
            r: op.r,
            phi: op.phi,
            potential: self.potential_block.as_ref().map(|b| potential_block(b, th)),
            weighted_sum,
            cross_ratios,
            rhs_l2: lp_norm(dtheta, 2.0),
            rhs_linf: lp_norm(dtheta, f64::INFINITY),
            tail_cert: tail_bound * state.time(),
        }
    }
}

/// Limit configuration of a homogeneous sender run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AsymptoticKind {
    /// Every phase at `theta_limit = θ₀`.
    FullSync { theta_limit: f64 },
    /// Oscillator `outlier` (1-based) at `θ₀ + s(1 − κ_j)π`, the rest at
    /// `θ₀ − sκ_jπ`.
    BiCluster { outlier: usize, sign: i8 },
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticClass {
    pub kind: AsymptoticKind,
    /// `max_i |θ_i − θ₀|`.
    pub sync_residual: f64,
    /// Smallest bi-cluster residual over all candidates `(j, s)`.
    pub bicluster_residual: f64,
}

/// Classifies a final sender configuration against the candidate set
/// `{θ₀} ∪ {θ₀ ± κ_iπ} ∪ {θ₀ ± (1 − κ_i)π}`.
///
/// A state with vanishing centroid (`r < R_FLOOR`) is the stationary
/// incoherent branch and is reported as unresolved even when it happens to
/// coincide with a bi-cluster point (as it does for `κ_j = ½`).
pub fn classify_state(final_theta: &PhaseState, kappa: &PositiveSequence, theta0: f64, tol: f64) -> AsymptoticClass {
    let th = final_theta.phases();
    let n = th.len();
    let weights = kappa.prefix(n);
    let sync_residual = th.iter().fold(0.0f64, |m, x| m.max((x - theta0).abs()));
    let mut best = f64::INFINITY;
    let mut found = None;
    for j in 0..n {
        for sign in [1i8, -1] {
            let s = f64::from(sign);
            let outlier_target = theta0 + s * (1.0 - weights[j]) * PI;
            let bulk_target = theta0 - s * weights[j] * PI;
            let residual = th
                .iter()
                .enumerate()
                .map(|(i, x)| if i == j { (x - outlier_target).abs() } else { (x - bulk_target).abs() })
                .fold(0.0f64, f64::max);
            if residual < best {
                best = residual;
            }
            // On two-oscillator states the candidate (j, s) and its mirror
            // describe the same configuration; the lighter oscillator is the
            // outlier.
            if residual < tol && found.map_or(true, |(f, _): (usize, i8)| weights[j] < weights[f - 1]) {
                found = Some((j + 1, sign));
            }
        }
    }
    let r = order_parameters_weighted(th, &weights).r;
    let kind = if r < R_FLOOR {
        AsymptoticKind::Unresolved
    } else if sync_residual < tol {
        AsymptoticKind::FullSync { theta_limit: theta0 }
    } else if let Some((outlier, sign)) = found {
        AsymptoticKind::BiCluster { outlier, sign }
    } else {
        AsymptoticKind::Unresolved
    };
    AsymptoticClass {
        kind,
        sync_residual,
        bicluster_residual: best,
    }
}

/// [`classify_state`] on the last sample of a run that reached equilibrium.
pub fn classify_asymptotic(trajectory: &Trajectory, kappa: &PositiveSequence, theta0: f64, tol: f64) -> Result<AsymptoticClass> {
    if !trajectory.equilibrium {
        return Err(Error::NotConverged);
    }
    Ok(classify_state(trajectory.last_state(), kappa, theta0, tol))
}

/// `γ = asin(D(𝒱) / (‖κ̃‖₁ ‖K‖_{-∞,1}))`.
pub fn practical_sync_gamma(d_nu: f64, tilde_kappa_l1: f64, k_minus: f64) -> Result<f64> {
    if !(d_nu >= 0.0 && d_nu.is_finite()) {
        return Err(Error::HypothesisViolated(format!("frequency diameter {d_nu} must be ≥ 0")));
    }
    if !(tilde_kappa_l1 > 0.0 && k_minus > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "need ‖κ̃‖₁ > 0 and ‖K‖_-∞,1 > 0, got {tilde_kappa_l1} and {k_minus}"
        )));
    }
    let ratio = d_nu / (tilde_kappa_l1 * k_minus);
    if ratio >= 1.0 {
        return Err(Error::HypothesisViolated(format!(
            "D(V) = {d_nu} is not below ‖κ̃‖₁‖K‖_-∞,1 = {}",
            tilde_kappa_l1 * k_minus
        )));
    }
    Ok(ratio.asin())
}

/// `D(Θ(t_{k+1})) ≤ D(Θ(t_k)) + tol` at every consecutive pair of samples.
pub fn diameter_monotonicity_check(trajectory: &Trajectory, tol: f64) -> CheckResult {
    let mut check = CheckResult::new("diameter_monotone");
    let mut worst_increase = f64::NEG_INFINITY;
    for w in trajectory.diagnostics.windows(2) {
        let inc = w[1].d_theta - w[0].d_theta;
        worst_increase = worst_increase.max(inc);
        check.observe(tol - inc);
    }
    check.measure("max_increase", worst_increase);
    check.finish()
}

/// `|D(Θ(t)) − target| < tol` at every sample.
pub fn constant_diameter_check(trajectory: &Trajectory, target: f64, tol: f64) -> CheckResult {
    let mut check = CheckResult::new("constant_diameter");
    let mut worst = 0.0f64;
    for rec in &trajectory.diagnostics {
        let dev = (rec.d_theta - target).abs();
        worst = worst.max(dev);
        check.observe(tol - dev);
    }
    check.measure("max_deviation", worst);
    check.measure("target", target);
    check.finish()
}

/// `|𝒮(t) − 𝒮(0)| < tol` throughout.
pub fn weighted_sum_conservation_check(trajectory: &Trajectory, tol: f64) -> CheckResult {
    let mut check = CheckResult::new("weighted_sum_conserved");
    let Some(s0) = trajectory.diagnostics.first().and_then(|r| r.weighted_sum) else {
        check.note("no conserved weighted sum for this family");
        return check.not_applicable();
    };
    let mut worst = 0.0f64;
    for rec in &trajectory.diagnostics {
        let drift = (rec.weighted_sum.unwrap_or(f64::NAN) - s0).abs();
        worst = worst.max(drift);
        check.observe(tol - drift);
    }
    check.measure("initial", s0);
    check.measure("max_drift", worst);
    check.finish()
}

/// Order-parameter monotonicity `r(t_{k+1}) ≥ r(t_k) − tol` and the
/// dichotomy at the final time: either `r ≡ 0` throughout or
/// `Σ κ_k sin²(θ_k − φ) < dichotomy_tol` (enforced once `r(0) > DICHOTOMY_R_MIN`).
pub fn r_monotonicity_check(trajectory: &Trajectory, k: &CouplingMatrix, tol: f64, dichotomy_tol: f64) -> CheckResult {
    let mut check = CheckResult::new("order_parameter_monotone");
    let Some(kappa) = k.sender_weights() else {
        check.note("requires a sender network");
        return check.not_applicable();
    };
    if !trajectory.frequencies.is_homogeneous() {
        check.note("requires homogeneous frequencies");
        return check.not_applicable();
    }
    let recs = &trajectory.diagnostics;
    let n = trajectory.states[0].truncation();
    let weights = kappa.prefix(n);
    let r_cap = crate::summation::neumaier_sum(weights.iter().copied()) * (1.0 + 4.0 * f64::EPSILON);
    let mut worst_drop = f64::NEG_INFINITY;
    for rec in recs {
        check.observe(r_cap - rec.r);
    }
    for w in recs.windows(2) {
        let drop = w[0].r - w[1].r;
        worst_drop = worst_drop.max(drop);
        check.observe(tol - drop);
    }
    check.measure("max_decrease", worst_drop);
    let r0 = recs[0].r;
    check.measure("r_initial", r0);
    let last = recs.last().expect("nonempty");
    check.measure("r_final", last.r);
    if r0 < R_FLOOR {
        let max_r = recs.iter().fold(0.0f64, |m, r| m.max(r.r));
        check.note("incoherent branch: r(0) = 0");
        check.measure("max_r", max_r);
        check.observe(R_FLOOR - max_r);
    } else {
        let th = trajectory.last_state().phases();
        let residual = match last.phi {
            Some(phi) => sine_residual(th, &weights, phi),
            None => f64::NAN,
        };
        check.measure("final_sine_residual", residual);
        if r0 > DICHOTOMY_R_MIN {
            check.observe(dichotomy_tol - residual);
        } else {
            check.note("r(0) too small to enforce the final sine residual");
        }
    }
    check.finish()
}

/// The Lyapunov identity `dP/dt = −‖Θ̇‖₂²` by central differences of the
/// recorded potential, plus monotonicity of `P` and the printed bounds
/// `|dP/dt| ≤ ‖K‖²_{2,1}` and `|d²P/dt²| ≤ 2‖K‖²_{∞,1}‖K‖_{1,1}`.
///
/// The identity passes when at least 99% of interior samples agree within
/// `max(1e-6, 1e-3·|value|)`. On a homogeneous run with `ν ≠ 0` the
/// identity is evaluated in the co-rotating frame (`Θ̇ − ν`).
pub fn lyapunov_identity_check(trajectory: &Trajectory, k: &CouplingMatrix) -> CheckResult {
    let mut check = CheckResult::new("lyapunov_identity");
    if !k.is_symmetric_summable() {
        check.note("requires a symmetric summable network");
        return check.not_applicable();
    }
    if !trajectory.frequencies.is_homogeneous() {
        check.note("requires homogeneous frequencies");
        return check.not_applicable();
    }
    let recs = &trajectory.diagnostics;
    if recs.len() < 3 {
        check.note("need at least three samples");
        return check.not_applicable();
    }
    let n = trajectory.states[0].truncation();
    let field = match VectorField::new(k, &FrequencyVector::Homogeneous(0.0), n, TailModel::Dropped, true) {
        Ok(f) => f,
        Err(e) => return check.failed(e.to_string()),
    };
    let p: Vec<f64> = recs.iter().map(|r| r.potential.unwrap_or(f64::NAN)).collect();
    let dissipation: Vec<f64> = trajectory
        .states
        .iter()
        .map(|s| lp_norm(&field.eval_vec(s.phases()), 2.0).powi(2))
        .collect();
    let t = &trajectory.sample_times;

    let k21 = k.norm_p_one(2.0).powi(2);
    let k_inf = k.norm_inf_one();
    let second_bound = 2.0 * k_inf * k_inf * k.norm_p_one(1.0);

    let mut agree = 0usize;
    let mut interior = 0usize;
    let mut worst_rel = 0.0f64;
    let mut max_second = 0.0f64;
    for i in 1..recs.len() - 1 {
        let fd = (p[i + 1] - p[i - 1]) / (t[i + 1] - t[i - 1]);
        let exact = -dissipation[i];
        let err = (fd - exact).abs();
        let tol = (1e-3 * exact.abs()).max(1e-6);
        interior += 1;
        if err <= tol {
            agree += 1;
        }
        worst_rel = worst_rel.max(err / tol);
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        let second = 2.0 * (h1 * p[i + 1] - (h1 + h2) * p[i] + h2 * p[i - 1]) / (h1 * h2 * (h1 + h2));
        max_second = max_second.max(second.abs());
        check.observe(second_bound - second.abs());
    }
    for w in p.windows(2) {
        check.observe(1e-9 - (w[1] - w[0]));
    }
    for d in &dissipation {
        check.observe(k21 * (1.0 + 1e-12) - d);
    }
    let fraction = agree as f64 / interior as f64;
    check.measure("identity_fraction", fraction);
    check.measure("worst_error_over_tolerance", worst_rel);
    check.measure("max_second_derivative", max_second);
    check.measure("second_derivative_bound", second_bound);
    check.measure("first_derivative_bound", k21);
    let check = check.finish();
    if fraction < 0.99 {
        check.failed(format!("identity held at {agree}/{interior} interior samples"))
    } else {
        check
    }
}

/// Central finite-difference gradient of `P` against
/// `Φ_k = −Σ_j κ_kj sin(θ_j − θ_k)` at every coordinate.
pub fn gradient_check(theta: &PhaseState, k: &CouplingMatrix, h_fd: f64) -> CheckResult {
    let mut check = CheckResult::new("gradient_flow");
    if !k.is_symmetric_summable() {
        check.note("requires a symmetric summable network");
        return check.not_applicable();
    }
    if !((2f64.powi(-20)..=2f64.powi(-10)).contains(&h_fd)) {
        check.note(format!("finite-difference step {h_fd} outside [2^-20, 2^-10]"));
        return check.not_applicable();
    }
    let n = theta.truncation();
    let block = k.block(n);
    let field = VectorField::new(k, &FrequencyVector::Homogeneous(0.0), n, TailModel::Dropped, true)
        .expect("dimensions agree");
    let minus_phi = field.eval_vec(theta.phases());
    let tol = (h_fd * h_fd * k.norm_p_one(1.0) * 4.0).max(1e-6);
    let mut work = theta.phases().to_vec();
    let mut worst = 0.0f64;
    for c in 0..n {
        let x = work[c];
        work[c] = x + h_fd;
        let plus = potential_block(&block, &work);
        work[c] = x - h_fd;
        let minus = potential_block(&block, &work);
        work[c] = x;
        let fd = (plus - minus) / (2.0 * h_fd);
        let err = (fd + minus_phi[c]).abs();
        worst = worst.max(err);
        check.observe(tol - err);
    }
    check.measure("max_error", worst);
    check.measure("tolerance", tol);
    check.finish()
}

/// First-order remainder of the potential,
/// `|P(Θ+h) − P(Θ) − ⟨Φ,h⟩| ≤ ½Σκ_ij|h_i − h_j|² ≤ ‖K‖_{1,1}‖h‖₂²`,
/// for each perturbation with `‖h‖₂ < 1/√2`.
pub fn potential_remainder_check(theta: &PhaseState, k: &CouplingMatrix, perturbations: &[Vec<f64>]) -> CheckResult {
    let mut check = CheckResult::new("potential_remainder");
    if !k.is_symmetric_summable() {
        check.note("requires a symmetric summable network");
        return check.not_applicable();
    }
    let n = theta.truncation();
    let block = k.block(n);
    let th = theta.phases();
    let field = VectorField::new(k, &FrequencyVector::Homogeneous(0.0), n, TailModel::Dropped, true)
        .expect("dimensions agree");
    let minus_phi = field.eval_vec(th);
    let p0 = potential_block(&block, th);
    let k11 = k.norm_p_one(1.0);
    let slack = |bound: f64| bound * (1.0 + 1e-12) + 1e-15;
    let mut skipped = 0usize;
    for h in perturbations {
        let h_norm = lp_norm(h, 2.0);
        if h.len() != n || h_norm >= std::f64::consts::FRAC_1_SQRT_2 {
            skipped += 1;
            continue;
        }
        let moved: Vec<f64> = th.iter().zip(h).map(|(a, b)| a + b).collect();
        let mut inner = NeumaierSum::new();
        for (g, hk) in minus_phi.iter().zip(h) {
            inner.add(-g * hk);
        }
        let remainder = (potential_block(&block, &moved) - p0 - inner.value()).abs();
        let mut quad = NeumaierSum::new();
        for i in 0..n {
            for j in 0..n {
                quad.add(block[i * n + j] * (h[i] - h[j]).powi(2));
            }
        }
        let middle = 0.5 * quad.value();
        check.observe(slack(middle) - remainder);
        check.observe(slack(k11 * h_norm * h_norm) - middle);
    }
    if skipped > 0 {
        check.note(format!("{skipped} perturbations outside the admissible ball were skipped"));
    }
    check.finish()
}

/// Constancy of the cross ratios along a homogeneous sender run. A tuple
/// whose points come within the gap floor is truncated at its last valid
/// sample and flagged rather than failed.
pub fn cross_ratio_constancy_check(trajectory: &Trajectory, tuples: &[[usize; 4]]) -> CheckResult {
    let mut check = CheckResult::new("cross_ratio_constant");
    let mut flagged = 0usize;
    let mut worst_rel = 0.0f64;
    for &tuple in tuples {
        let mut c0 = None;
        for state in &trajectory.states {
            match cross_ratio_with_floor(state.phases(), tuple, GAP_FLOOR) {
                Ok(c) => {
                    let base = *c0.get_or_insert(c);
                    let dev = (c - base).norm();
                    let bound = 1e-6 * (1.0 + base.norm());
                    worst_rel = worst_rel.max(dev / (1.0 + base.norm()));
                    check.observe(bound - dev);
                }
                Err(Error::DegenerateTuple { .. }) => {
                    flagged += 1;
                    break;
                }
                Err(e) => return check.failed(e.to_string()),
            }
        }
    }
    check.measure("tuples", tuples.len() as f64);
    check.measure("flagged_tuples", flagged as f64);
    check.measure("max_relative_deviation", worst_rel);
    let check = check.finish();
    if check.status == CheckStatus::Pass && flagged > 0 {
        check.flagged()
    } else {
        check
    }
}

/// `sup D(Θ)` over the final `window` fraction of samples is at most
/// `γ + slack`. Not applicable when the initial diameter is not below `π`.
pub fn practical_sync_check(trajectory: &Trajectory, gamma: f64, window: f64, slack: f64) -> CheckResult {
    let mut check = CheckResult::new("practical_sync");
    let recs = &trajectory.diagnostics;
    if recs[0].d_theta >= PI {
        check.note("initial diameter is not below π");
        return check.not_applicable();
    }
    let start = ((1.0 - window.clamp(0.0, 1.0)) * recs.len() as f64).floor() as usize;
    let start = start.min(recs.len() - 1);
    let tail_sup = recs[start..].iter().fold(0.0f64, |m, r| m.max(r.d_theta));
    check.measure("tail_sup", tail_sup);
    check.measure("gamma", gamma);
    check.measure("bound", gamma + slack);
    check.observe(gamma + slack - tail_sup);
    check.finish()
}

/// Least-squares slope of `ln y` against `t`.
pub fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(t, y) in points {
        sxy += (t - mt) * (y.ln() - my);
        sxx += (t - mt) * (t - mt);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Frequency-diameter envelope after entry into the quarter arc:
/// `D(𝒲(t)) ≤ D(𝒲(t₀)) exp(−(3‖K‖_{∞,1} log 2 / 32)(t − t₀) + 1)` for all
/// samples `t ≥ t₀`, where `t₀` is the first sample with
/// `D(Θ) < π/2 − QUARTER_ARC_MARGIN`. Also fits the empirical decay rate of
/// `ln D(𝒲)` over the samples after `t₀` that lie above the rounding floor,
/// and requires it to be at most `max_rate`.
pub fn frequency_decay_check(trajectory: &Trajectory, k: &CouplingMatrix, max_rate: f64) -> Result<CheckResult> {
    let mut check = CheckResult::new("frequency_decay");
    if !k.is_sender() {
        check.note("requires a sender network");
        return Ok(check.not_applicable());
    }
    let Some(omegas) = trajectory.omegas.as_ref() else {
        check.note("requires a second-order run");
        return Ok(check.not_applicable());
    };
    let recs = &trajectory.diagnostics;
    let entry = recs
        .iter()
        .position(|r| r.d_theta < FRAC_PI_2 - QUARTER_ARC_MARGIN)
        .ok_or(Error::NoEntranceTime {
            t_end: *trajectory.sample_times.last().expect("nonempty"),
        })?;
    let t0 = trajectory.sample_times[entry];
    let rate = 3.0 * k.norm_inf_one() * std::f64::consts::LN_2 / 32.0;
    let d0 = omegas[entry].diameter();
    let mut fit = Vec::new();
    for (idx, om) in omegas.iter().enumerate().skip(entry) {
        let t = trajectory.sample_times[idx];
        let d = om.diameter();
        let envelope = d0 * (-rate * (t - t0) + 1.0).exp();
        check.observe(envelope * (1.0 + 1e-12) - d);
        if d > DECAY_FIT_FLOOR {
            fit.push((t, d));
        }
    }
    let slope = log_slope(&fit);
    check.measure("t0", t0);
    check.measure("d_omega_t0", d0);
    check.measure("theoretical_rate", -rate);
    check.measure("fit_points", fit.len() as f64);
    match slope {
        Some(s) => {
            check.measure("fitted_rate", s);
            check.observe(max_rate - s);
        }
        None if d0 <= DECAY_FIT_FLOOR => check.note("frequency diameter already at the rounding floor"),
        None => {
            check.note("too few samples above the floor to fit a rate");
            check.observe(-1.0);
        }
    }
    Ok(check.finish())
}

/// Exponential decay of the phase diameter: the slope of `ln D(Θ)` over the
/// second half of the run (restricted to values above the rounding floor) is
/// strictly negative and the final diameter is below `final_bound`.
pub fn exponential_decay_check(trajectory: &Trajectory, final_bound: f64) -> CheckResult {
    let mut check = CheckResult::new("exponential_decay");
    let recs = &trajectory.diagnostics;
    let half = recs.len() / 2;
    let mut pts: Vec<(f64, f64)> = recs[half..]
        .iter()
        .filter(|r| r.d_theta > DECAY_FIT_FLOOR)
        .map(|r| (r.t, r.d_theta))
        .collect();
    if pts.len() < 3 {
        check.note("second half at the rounding floor; fitting over the whole run");
        pts = recs
            .iter()
            .filter(|r| r.d_theta > DECAY_FIT_FLOOR)
            .map(|r| (r.t, r.d_theta))
            .collect();
    }
    let final_d = recs.last().expect("nonempty").d_theta;
    check.measure("final_diameter", final_d);
    check.observe(final_bound - final_d);
    match log_slope(&pts) {
        Some(s) => {
            check.measure("fitted_rate", s);
            check.observe(if s < 0.0 { -s } else { -1.0 });
        }
        None => {
            check.note("too few samples above the floor to fit a rate");
            check.observe(-1.0);
        }
    }
    check.finish()
}

/// Every pairwise difference of the final phases lies within `tol` of an
/// integer multiple of `π`.
pub fn phase_quantization_check(trajectory: &Trajectory, tol: f64) -> CheckResult {
    let mut check = CheckResult::new("phase_quantization");
    let th = trajectory.last_state().phases();
    let mut worst = 0.0f64;
    for i in 0..th.len() {
        for j in i + 1..th.len() {
            let d = th[i] - th[j];
            let dist = (d - (d / PI).round() * PI).abs();
            worst = worst.max(dist);
            check.observe(tol - dist);
        }
    }
    check.measure("max_distance", worst);
    check.finish()
}

/// The ascending order of the initial phases is preserved (ties allowed)
/// and every pairwise gap stays within `[0, 2π]` at every sample.
pub fn collision_avoidance_check(trajectory: &Trajectory) -> CheckResult {
    let mut check = CheckResult::new("collision_avoidance");
    let init = trajectory.states[0].phases();
    let mut order: Vec<usize> = (0..init.len()).collect();
    order.sort_by(|&a, &b| init[a].total_cmp(&init[b]));
    let mut min_gap = f64::INFINITY;
    let mut max_spread = 0.0f64;
    for state in &trajectory.states {
        let th = state.phases();
        for w in order.windows(2) {
            let gap = th[w[1]] - th[w[0]];
            min_gap = min_gap.min(gap);
            check.observe(gap);
        }
        let spread = th[*order.last().expect("nonempty")] - th[order[0]];
        max_spread = max_spread.max(spread);
        // Slack for the rounding of the subtraction itself.
        check.observe(2.0 * PI + 1e-12 - spread);
    }
    check.measure("min_ordered_gap", min_gap);
    check.measure("max_spread", max_spread);
    check.finish()
}

/// Samples the hypotheses of the two elementary trigonometric inequalities
/// and asserts them:
///
/// * `sin(c−a) + sin(a−b) + sin(b−c) ≤ 4 sin(ε₂/2)` whenever
///   `0 ≤ c−a ≤ π−ε₁`, `a−ε₂ ≤ b ≤ c+ε₂`, `0 ≤ ε₂ ≤ ε₁`;
/// * `|2 sin(θ+h/2) sin(h/2) − h sin θ| ≤ h²` whenever `|h| < 1`.
pub fn trig_lemma_checks(sample_count: usize, seed: u64) -> CheckResult {
    let mut check = CheckResult::new("trig_lemmas");
    let mut rng = rng::stream(seed, rng::streams::LEMMA_SAMPLES);
    let mut worst_sum = f64::NEG_INFINITY;
    let mut worst_diff = f64::NEG_INFINITY;
    for _ in 0..sample_count {
        let eps1 = rng.gen::<f64>() * PI;
        let eps2 = rng.gen::<f64>() * eps1;
        let a = (rng.gen::<f64>() * 2.0 - 1.0) * PI;
        let c = a + rng.gen::<f64>() * (PI - eps1);
        let b = (a - eps2) + rng.gen::<f64>() * ((c + eps2) - (a - eps2));
        let lhs = (c - a).sin() + (a - b).sin() + (b - c).sin();
        let rhs = 4.0 * (eps2 / 2.0).sin();
        worst_sum = worst_sum.max(lhs - rhs);
        check.observe(rhs + 8.0 * f64::EPSILON - lhs);

        let theta = (rng.gen::<f64>() * 2.0 - 1.0) * 4.0 * PI;
        let h = rng.gen::<f64>() * 2.0 - 1.0;
        let lhs = (2.0 * (theta + h / 2.0).sin() * (h / 2.0).sin() - h * theta.sin()).abs();
        worst_diff = worst_diff.max(lhs - h * h);
        check.observe(h * h + 8.0 * f64::EPSILON * h.abs() - lhs);
    }
    check.measure("worst_additive_excess", worst_sum);
    check.measure("worst_difference_excess", worst_diff);
    check.finish()
}

/// Convenience: the initial diameter of a run.
pub fn initial_diameter(trajectory: &Trajectory) -> f64 {
    diameter_of(trajectory.states[0].phases())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_2};

    fn state(v: &[f64]) -> PhaseState {
        PhaseState::new(v.to_vec()).unwrap()
    }

    fn seq(v: &[f64]) -> PositiveSequence {
        PositiveSequence::explicit(v.to_vec()).unwrap()
    }

    /// The defining complex quotient, used as an oracle.
    fn direct_cross_ratio(th: [f64; 4]) -> Complex64 {
        let z = th.map(|t| Complex64::from_polar(1.0, t));
        (z[0] - z[2]) / (z[0] - z[1]) * (z[1] - z[3]) / (z[2] - z[3])
    }

    #[test]
    fn order_parameter_examples() {
        let op = order_parameters(&state(&[0.3; 4]), &seq(&[0.25; 4]));
        assert!((op.r - 1.0).abs() < 1e-15 && (op.phi.unwrap() - 0.3).abs() < 1e-15);
        let op = order_parameters(&state(&[0.0, FRAC_PI_2]), &seq(&[0.5, 0.5]));
        assert!((op.r - 0.5f64.sqrt()).abs() < 1e-15 && (op.phi.unwrap() - FRAC_PI_4).abs() < 1e-15);
        let op = order_parameters(&state(&[0.0, PI]), &seq(&[0.5, 0.5]));
        assert!(op.r < R_FLOOR && op.phi.is_none());
    }

    #[test]
    fn potential_examples() {
        let ps = CouplingMatrix::product_summable(PositiveSequence::dyadic());
        assert_eq!(potential(&state(&[0.2; 6]), &ps).unwrap(), 0.0);
        let swap = CouplingMatrix::finite_embedded(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(potential(&state(&[0.0, PI]), &swap).unwrap(), 2.0);

        let th: Vec<f64> = (1..=40).map(|i| if i % 2 == 0 { FRAC_PI_2 } else { -FRAC_PI_2 }).collect();
        let mut oracle = 0.0;
        for i in 1..=40 {
            for j in 1..=40 {
                oracle += 0.5 * ps.entry(i, j) * (1.0 - (th[i - 1] - th[j - 1]).cos());
            }
        }
        let p = potential(&state(&th), &ps).unwrap();
        assert!((p - oracle).abs() < 1e-14);
        assert!((p - 4.0 / 9.0).abs() < 1e-11);

        let sender = CouplingMatrix::sender(PositiveSequence::dyadic(), true);
        assert!(matches!(potential(&state(&[0.0]), &sender), Err(Error::WrongFamily { .. })));
    }

    #[test]
    fn cross_ratio_examples() {
        let th = [0.0, FRAC_PI_2, PI, 1.5 * PI];
        let c = cross_ratio(&state(&th), 1, 2, 3, 4).unwrap();
        assert!((c - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((c - direct_cross_ratio(th)).norm() < 1e-14);
        let shifted = th.map(|t| t + 0.37);
        let c2 = cross_ratio(&state(&shifted), 1, 2, 3, 4).unwrap();
        assert!((c2 - c).norm() < 1e-12 * c.norm());
        let bad = cross_ratio(&state(&[0.0, 0.1, 0.2, 0.1 + 2f64.powi(-30)]), 1, 2, 3, 4);
        assert!(matches!(bad, Err(Error::DegenerateTuple { .. })));
    }

    #[test]
    fn classification_examples() {
        let k = seq(&[0.25, 0.25, 0.5]);
        let c = classify_state(&state(&[0.7; 3]), &k, 0.7, 1e-3);
        assert_eq!(c.kind, AsymptoticKind::FullSync { theta_limit: 0.7 });
        let c = classify_state(&state(&[0.0, PI]), &seq(&[0.5, 0.5]), FRAC_PI_2, 1e-3);
        assert_eq!(c.kind, AsymptoticKind::Unresolved);
        let t0 = 0.4;
        let c = classify_state(&state(&[t0 - FRAC_PI_4, t0 + 0.75 * PI]), &seq(&[0.75, 0.25]), t0, 1e-3);
        assert_eq!(c.kind, AsymptoticKind::BiCluster { outlier: 2, sign: 1 });
    }

    #[test]
    fn gamma_examples() {
        let g = practical_sync_gamma(0.1, 1.0, 1.0).unwrap();
        assert!((g - 0.100_167_421_161_559_8).abs() < 1e-15);
        assert!(practical_sync_gamma(1e-12, 1.0, 1.0).unwrap() < 1e-11);
        assert!(matches!(practical_sync_gamma(0.5, 0.5, 1.0), Err(Error::HypothesisViolated(_))));
        assert!(practical_sync_gamma(0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn trig_lemma_examples() {
        let (a, b, c) = (0.4f64, 0.4f64, 0.4f64);
        assert!((c - a).sin() + (a - b).sin() + (b - c).sin() <= 0.0);
        let (e1, e2) = (0.3, 0.3);
        let (a, b, c) = (0.0, -e2, PI - e1);
        let lhs: f64 = (c - a).sin() + (a - b).sin() + (b - c).sin();
        assert!(lhs <= 4.0 * 0.15f64.sin());
        let lhs = (2.0 * 1.25f64.sin() * 0.25f64.sin() - 0.5 * 1f64.sin()).abs();
        // 2·0.948985·0.247404 − 0.5·0.841471
        assert!((lhs - 0.048_821).abs() < 1e-5 && lhs <= 0.25);
        assert!(trig_lemma_checks(10_000, 1).passed());
    }

    #[test]
    fn check_result_bookkeeping() {
        let mut c = CheckResult::new("x");
        c.observe(1.0);
        c.observe(-0.5);
        c.observe(f64::NAN);
        let c = c.finish();
        assert_eq!(c.status, CheckStatus::Fail);
        assert_eq!(c.violations, 2);
        assert_eq!(c.samples, 3);
        assert!(c.worst_margin.is_nan());
    }

    #[test]
    fn log_slope_recovers_rates() {
        let pts: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, (-0.3 * k as f64).exp())).collect();
        assert!((log_slope(&pts).unwrap() + 0.3).abs() < 1e-12);
        assert!(log_slope(&pts[..1]).is_none());
    }
}
