//! The acceptance suite: seventeen criteria, each a set of scenarios plus
//! the checks and tolerances that decide it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{render_csv, run_with_trajectory, seeded_pairs, seeded_perturbations, RunReport};
use super::scenario::{
    CheckName, DiagnosticsSpec, FrequencySpec, InitialSpec, IntegratorSpec, OutputSpec, Scenario, TopologySpec,
    TupleSpec, DEFAULT_FD_STEP, SCHEMA_VERSION,
};
use crate::diagnostics::{self as diag, CheckResult, CheckStatus};
use crate::dynamics::{lipschitz_check, DEFAULT_EQUILIBRIUM_TOL, DEFAULT_STEP_SAFETY, Method};
use crate::ensemble::{FrequencyVector, PhaseState, TailModel};
use crate::rng;
use crate::topology::{CouplingMatrix, PositiveSequence};

/// Largest admissible `ε_tail(N) · t_end` in any acceptance scenario.
pub const TAIL_BUDGET: f64 = 1e-4;

/// Seeds of the multi-seed criteria.
pub const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

/// Settings shared by every criterion of one suite run.
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Where scenario CSV/JSON files go (one subdirectory per criterion).
    pub out_dir: Option<PathBuf>,
}

/// One acceptance criterion.
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    /// Wall-clock budget in seconds, where one is stated.
    pub budget: Option<f64>,
    /// Whether a Flagged check (degeneracy guard) counts as acceptable.
    pub allow_flagged: bool,
    run: fn(&Ctx) -> Vec<CheckResult>,
}

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub elapsed_seconds: f64,
    pub budget_seconds: Option<f64>,
    pub checks: Vec<CheckResult>,
}

impl CriterionOutcome {
    /// `PASS criterion 3 complete_sync …` with the first failing check.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{verdict} criterion {:>2} {:<26} {:>4} checks {:>7.2}s",
            self.id,
            self.name,
            self.checks.len(),
            self.elapsed_seconds
        );
        if let Some(b) = self.budget_seconds {
            s.push_str(&format!(" (budget {b}s)"));
        }
        let bad = self
            .checks
            .iter()
            .find(|c| c.status == CheckStatus::Fail)
            .or_else(|| self.checks.iter().find(|c| c.status != CheckStatus::Pass));
        if let (false, Some(bad)) = (self.passed, bad) {
            s.push_str(&format!(" — {}: {:?}, worst margin {:e}", bad.name, bad.status, bad.worst_margin));
            if let Some(note) = bad.notes.first() {
                s.push_str(&format!(" ({note})"));
            }
        }
        s
    }
}

/// Aggregate of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub passed: bool,
    pub outcomes: Vec<CriterionOutcome>,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

struct Ctx {
    id: u8,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn dir(&self) -> Option<PathBuf> {
        self.out_dir.as_ref().map(|d| d.join(format!("criterion-{:02}", self.id)))
    }

    /// Runs a scenario and returns its checks, each prefixed with the
    /// scenario name, plus the tail-certificate budget check.
    fn run(&self, sc: &Scenario) -> (RunReport, Option<crate::dynamics::Trajectory>, Vec<CheckResult>) {
        let (report, traj) = run_with_trajectory(sc, self.dir().as_deref());
        let mut checks = Vec::new();
        if let Some(err) = &report.error {
            checks.push(CheckResult::new(format!("{}/run", sc.name)).failed(err.clone()));
        }
        for c in &report.checks {
            let mut c = c.clone();
            c.name = format!("{}/{}", sc.name, c.name);
            checks.push(c);
        }
        if let Some(cert) = report.tail_certificate {
            let mut c = CheckResult::new(format!("{}/tail_certificate", sc.name));
            c.measure("tail_certificate", cert);
            c.observe(TAIL_BUDGET - cert);
            checks.push(c.finish());
        }
        (report, traj, checks)
    }

    fn run_all(&self, scenarios: Vec<Scenario>) -> Vec<CheckResult> {
        scenarios.par_iter().map(|sc| self.run(sc).2).collect::<Vec<_>>().concat()
    }
}

fn acceptable(c: &CheckResult, allow_flagged: bool) -> bool {
    c.status == CheckStatus::Pass || (allow_flagged && c.status == CheckStatus::Flagged)
}

/// The criteria in order.
pub fn criteria() -> Vec<Criterion> {
    macro_rules! c {
        ($id:expr, $name:expr, $budget:expr, $flag:expr, $f:expr) => {
            Criterion {
                id: $id,
                name: $name,
                budget: $budget,
                allow_flagged: $flag,
                run: $f,
            }
        };
    }
    vec![
        c!(1, "constant_diameter", Some(5.0), false, c01_constant_diameter),
        c!(2, "diameter_monotone", Some(30.0), false, c02_diameter_monotone),
        c!(3, "complete_sync", Some(10.0), false, c03_complete_sync),
        c!(4, "lyapunov_identity", None, false, c04_lyapunov),
        c!(5, "gradient_flow", Some(10.0), false, c05_gradient),
        c!(6, "lipschitz", None, false, c06_lipschitz),
        c!(7, "derivative_bounds", None, false, c07_derivative_bounds),
        c!(8, "sender_conservation", None, false, c08_conservation),
        c!(9, "order_parameter_monotone", None, false, c09_order_parameter),
        c!(10, "phase_quantization", None, false, c10_quantization),
        c!(11, "collision_avoidance", None, false, c11_collisions),
        c!(12, "cross_ratio_constancy", Some(5.0), true, c12_cross_ratio),
        c!(13, "practical_sync", Some(10.0), false, c13_practical_sync),
        c!(14, "exponential_decay", None, false, c14_exponential_decay),
        c!(15, "frequency_decay", Some(10.0), false, c15_frequency_decay),
        c!(16, "trig_lemmas", Some(2.0), false, c16_trig),
        c!(17, "determinism", None, false, c17_determinism),
    ]
}

impl Criterion {
    /// Matches `"3"`, `"c3"`, `"criterion-3"`, or a substring of the name.
    pub fn matches(&self, pattern: &str) -> bool {
        let p = pattern.trim().to_ascii_lowercase();
        if p.is_empty() {
            return true;
        }
        let digits = p.trim_start_matches("criterion").trim_start_matches(['-', '_', 'c']);
        if let Ok(id) = digits.parse::<u8>() {
            return id == self.id;
        }
        self.name.contains(&p)
    }

    pub fn execute(&self, opts: &SuiteOptions) -> CriterionOutcome {
        let started = Instant::now();
        let ctx = Ctx {
            id: self.id,
            out_dir: opts.out_dir.clone(),
        };
        let mut checks = (self.run)(&ctx);
        let elapsed = started.elapsed().as_secs_f64();
        if let Some(budget) = self.budget {
            let mut c = CheckResult::new("runtime");
            c.measure("seconds", elapsed);
            c.measure("budget", budget);
            c.observe(budget - elapsed);
            checks.push(c.finish());
        }
        let passed = !checks.is_empty() && checks.iter().all(|c| acceptable(c, self.allow_flagged));
        CriterionOutcome {
            id: self.id,
            name: self.name.to_string(),
            passed,
            elapsed_seconds: elapsed,
            budget_seconds: self.budget,
            checks,
        }
    }
}

/// Runs every criterion matching `filter` (all of them for `None`).
pub fn acceptance_suite(filter: Option<&str>, opts: &SuiteOptions) -> SuiteReport {
    let started = Instant::now();
    let selected: Vec<Criterion> = criteria()
        .into_iter()
        .filter(|c| filter.map_or(true, |f| c.matches(f)))
        .collect();
    let mut warnings = Vec::new();
    if selected.is_empty() {
        warnings.push(format!("no criterion matches {:?}", filter.unwrap_or_default()));
    }
    let outcomes: Vec<CriterionOutcome> = selected.iter().map(|c| c.execute(opts)).collect();
    SuiteReport {
        passed: outcomes.iter().all(|o| o.passed),
        outcomes,
        warnings,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Runs one criterion by number.
pub fn run_criterion(id: u8, opts: &SuiteOptions) -> Option<CriterionOutcome> {
    criteria().into_iter().find(|c| c.id == id).map(|c| c.execute(opts))
}

// ---------------------------------------------------------------------------
// scenario builders

fn scenario(name: String, seed: u64, truncation: usize, topology: TopologySpec, initial: InitialSpec, t_end: f64) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name,
        seed,
        truncation,
        sample_stride: 1,
        equilibrium_tol: DEFAULT_EQUILIBRIUM_TOL,
        tail_budget: TAIL_BUDGET,
        tail: TailModel::Dropped,
        topology,
        initial,
        frequencies: FrequencySpec::Zero,
        integrator: IntegratorSpec {
            t_end,
            step: None,
            step_safety: DEFAULT_STEP_SAFETY,
            method: Method::Rk4Fixed,
            second_order: false,
        },
        diagnostics: DiagnosticsSpec::default(),
        output: OutputSpec::default(),
    }
}

fn with_checks(mut sc: Scenario, checks: &[CheckName]) -> Scenario {
    sc.diagnostics.checks = checks.to_vec();
    sc
}

/// Dyadic sender weights, renormalized over the scenario's truncation.
fn dyadic_sender() -> TopologySpec {
    TopologySpec::Sender {
        sequence: PositiveSequence::dyadic(),
        normalized: true,
        epsilon: crate::topology::DEFAULT_SENDER_EPSILON,
        renormalize_over_truncation: true,
    }
}

fn arc(width: f64) -> InitialSpec {
    InitialSpec::UniformArc { width, center: 0.0 }
}

/// Criterion 1: geometric cross coupling, alternating `±π/3`.
pub fn remark_scenario() -> Scenario {
    let mut sc = scenario(
        "constant-diameter".into(),
        0,
        20,
        TopologySpec::GeometricCross { base: 3.0 },
        InitialSpec::Alternating { amplitude: FRAC_PI_3 },
        50.0,
    );
    sc.integrator.step = Some(0.05);
    sc.diagnostics.diameter_target = Some(2.0 * PI / 3.0);
    sc.diagnostics.diameter_tol = 1e-3;
    sc
}

/// Criteria 2–4: dyadic product-summable coupling, arc of width `0.9π`.
pub fn product_scenario(seed: u64, t_end: f64) -> Scenario {
    scenario(
        format!("product-dyadic-t{t_end}-seed{seed}"),
        seed,
        32,
        TopologySpec::ProductSummable {
            sequence: PositiveSequence::dyadic(),
        },
        arc(0.9 * PI),
        t_end,
    )
}

/// Criteria 9–10: homogeneous dyadic sender, `N = 16`, arc of width `0.9π`.
pub fn sender_scenario(seed: u64) -> Scenario {
    scenario(format!("sender-dyadic-seed{seed}"), seed, 16, dyadic_sender(), arc(0.9 * PI), 300.0)
}

/// Criteria 13–14 (and 17): dyadic sender, `N = 16`, frequency diameter `d_nu`.
pub fn practical_scenario(seed: u64, d_nu: f64) -> Scenario {
    let mut sc = scenario(
        format!("practical-sync-dnu{d_nu}-seed{seed}"),
        seed,
        16,
        dyadic_sender(),
        arc(0.9 * PI),
        300.0,
    );
    if d_nu > 0.0 {
        sc.frequencies = FrequencySpec::Uniform {
            diameter: d_nu,
            center: 0.0,
        };
    }
    sc
}

// ---------------------------------------------------------------------------
// criteria

fn c01_constant_diameter(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run(&with_checks(remark_scenario(), &[CheckName::ConstantDiameter])).2
}

fn c02_diameter_monotone(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        SEEDS
            .map(|s| with_checks(product_scenario(s, 100.0), &[CheckName::DiameterMonotone]))
            .collect(),
    )
}

fn c03_complete_sync(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        SEEDS
            .map(|s| with_checks(product_scenario(s, 200.0), &[CheckName::CompleteSync]))
            .collect(),
    )
}

fn c04_lyapunov(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        SEEDS
            .map(|s| with_checks(product_scenario(s, 200.0), &[CheckName::LyapunovIdentity]))
            .collect(),
    )
}

fn c05_gradient(_ctx: &Ctx) -> Vec<CheckResult> {
    let k = CouplingMatrix::product_summable(PositiveSequence::dyadic());
    (1..=100u64)
        .into_par_iter()
        .flat_map_iter(|seed| {
            let th = rng::uniform_vec(seed, rng::streams::INITIAL_PHASES, 10, -PI, PI);
            let state = PhaseState::new(th).expect("finite");
            let hs = seeded_perturbations(seed, 10, 10);
            let mut g = diag::gradient_check(&state, &k, DEFAULT_FD_STEP);
            g.name = format!("state{seed}/gradient");
            let mut r = diag::potential_remainder_check(&state, &k, &hs);
            r.name = format!("state{seed}/remainder");
            [g, r]
        })
        .collect()
}

fn c06_lipschitz(_ctx: &Ctx) -> Vec<CheckResult> {
    const N: usize = 16;
    let symmetric_block: Vec<f64> = (1..=6)
        .flat_map(|i| (1..=6).map(move |j| 1.0 / (1.0 + (i + j) as f64)))
        .collect();
    let families: Vec<(&str, CouplingMatrix)> = vec![
        ("product_summable", CouplingMatrix::product_summable(PositiveSequence::dyadic())),
        ("geometric_cross", CouplingMatrix::geometric_cross(3.0).expect("valid base")),
        ("sender", CouplingMatrix::sender(PositiveSequence::dyadic(), true)),
        (
            "finite_embedded",
            CouplingMatrix::finite_embedded(6, symmetric_block).expect("valid block"),
        ),
        ("uniform_finite", CouplingMatrix::uniform_finite(8, 2.0).expect("valid strength")),
    ];
    let nu = FrequencyVector::per_index(rng::uniform_vec(6, rng::streams::FREQUENCIES, N, -1.0, 1.0)).expect("finite");
    let pairs = seeded_pairs(6, N, 1000);
    families
        .par_iter()
        .flat_map_iter(|(name, k)| {
            [1.0, 2.0, f64::INFINITY].map(|p| {
                let mut agg = CheckResult::new(format!("{name}/p{}", if p.is_infinite() { "inf".into() } else { p.to_string() }));
                for (a, b) in &pairs {
                    let c = lipschitz_check(k, &nu, a, b, p);
                    agg.samples += c.samples;
                    agg.violations += c.violations;
                    agg.worst_margin = agg.worst_margin.min(c.worst_margin);
                }
                agg.measure("pairs", pairs.len() as f64);
                agg.finish()
            })
        })
        .collect()
}

fn c07_derivative_bounds(ctx: &Ctx) -> Vec<CheckResult> {
    let mut scenarios = vec![with_checks(remark_scenario(), &[CheckName::DerivativeBounds])];
    for s in SEEDS {
        scenarios.push(with_checks(product_scenario(s, 100.0), &[CheckName::DerivativeBounds]));
        scenarios.push(with_checks(product_scenario(s, 200.0), &[CheckName::DerivativeBounds]));
    }
    ctx.run_all(scenarios)
}

fn c08_conservation(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        SEEDS
            .map(|s| {
                let mut sc = scenario(format!("sender-conservation-seed{s}"), s, 24, dyadic_sender(), arc(1.9 * PI), 100.0);
                sc.diagnostics.conservation_tol = 1e-8;
                with_checks(sc, &[CheckName::WeightedSumConserved])
            })
            .collect(),
    )
}

fn c09_order_parameter(ctx: &Ctx) -> Vec<CheckResult> {
    let mut checks = ctx.run_all(
        SEEDS
            .map(|s| with_checks(sender_scenario(s), &[CheckName::OrderParameterMonotone]))
            .collect(),
    );
    checks.extend(antipodal(ctx));
    checks
}

/// Weights `(½, ¼, ¼)` at phases `(0, π, −π)`: the centroid vanishes and the
/// configuration must not move at all.
fn antipodal(ctx: &Ctx) -> Vec<CheckResult> {
    let mut sc = scenario(
        "antipodal".into(),
        0,
        3,
        TopologySpec::Sender {
            sequence: PositiveSequence::explicit(vec![0.5, 0.25, 0.25]).expect("positive"),
            normalized: true,
            epsilon: crate::topology::DEFAULT_SENDER_EPSILON,
            renormalize_over_truncation: false,
        },
        InitialSpec::Explicit {
            phases: vec![0.0, PI, -PI],
        },
        300.0,
    );
    sc.diagnostics.checks = vec![CheckName::OrderParameterMonotone];
    let (_, traj, mut checks) = ctx.run(&sc);
    let mut c = CheckResult::new("antipodal/stationary");
    match traj {
        Some(traj) => {
            let init = traj.states[0].phases().to_vec();
            for state in &traj.states {
                let moved = state.phases().iter().zip(&init).any(|(a, b)| a != b);
                c.observe(if moved { -1.0 } else { 0.0 });
            }
            let max_r = traj.diagnostics.iter().fold(0.0f64, |m, r| m.max(r.r));
            c.measure("max_r", max_r);
            checks.push(c.finish());
        }
        None => checks.push(c.failed("integration failed")),
    }
    checks
}

fn c10_quantization(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        SEEDS
            .map(|s| {
                let mut sc = sender_scenario(s);
                sc.diagnostics.quantization_tol = 1e-3;
                sc.diagnostics.classify_tol = 1e-3;
                with_checks(sc, &[CheckName::PhaseQuantization, CheckName::AsymptoticClass])
            })
            .collect(),
    )
}

fn c11_collisions(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        SEEDS
            .map(|s| {
                let sc = scenario(format!("sender-wide-arc-seed{s}"), s, 16, dyadic_sender(), arc(1.9 * PI), 100.0);
                with_checks(sc, &[CheckName::CollisionAvoidance])
            })
            .collect(),
    )
}

/// The cross ratio `(1,2,3,4)` of four equally spaced points.
pub const EQUALLY_SPACED_CROSS_RATIO: f64 = 2.0;

fn c12_cross_ratio(ctx: &Ctx) -> Vec<CheckResult> {
    let mut sc = scenario("cross-ratio-n6".into(), 1, 6, dyadic_sender(), arc(1.5 * PI), 50.0);
    sc.diagnostics.cross_ratio_tuples = TupleSpec::Keyword("all".into());
    let (_, _, mut checks) = ctx.run(&with_checks(sc, &[CheckName::CrossRatioConstant]));

    // Unequal weights, so the configuration actually moves.
    let mut sq = scenario(
        "cross-ratio-square".into(),
        0,
        4,
        TopologySpec::Sender {
            sequence: PositiveSequence::explicit(vec![8.0, 4.0, 2.0, 1.0]).expect("positive"),
            normalized: true,
            epsilon: crate::topology::DEFAULT_SENDER_EPSILON,
            renormalize_over_truncation: false,
        },
        InitialSpec::Explicit {
            phases: vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2],
        },
        5.0,
    );
    sq.integrator.step = Some(0.01);
    sq.diagnostics.cross_ratio_tuples = TupleSpec::List(vec![[1, 2, 3, 4]]);
    let (_, traj, more) = ctx.run(&with_checks(sq, &[CheckName::CrossRatioConstant]));
    checks.extend(more);
    let mut c = CheckResult::new("cross-ratio-square/value");
    match traj {
        Some(traj) => {
            let mut worst = 0.0f64;
            let mut moved = 0.0f64;
            let init = traj.states[0].phases();
            for state in &traj.states {
                match diag::cross_ratio(state, 1, 2, 3, 4) {
                    Ok(z) => {
                        let dev = (z - num_complex::Complex64::new(EQUALLY_SPACED_CROSS_RATIO, 0.0)).norm();
                        worst = worst.max(dev);
                        c.observe(1e-8 - dev);
                    }
                    Err(e) => return [checks, vec![c.failed(e.to_string())]].concat(),
                }
                moved = moved.max(state.phases().iter().zip(init).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())));
            }
            c.measure("max_deviation", worst);
            c.measure("max_phase_motion", moved);
            checks.push(c.finish());
        }
        None => checks.push(c.failed("integration failed")),
    }
    checks
}

fn c13_practical_sync(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        (1..=5)
            .map(|s| with_checks(practical_scenario(s, 0.05), &[CheckName::Framework, CheckName::PracticalSync]))
            .collect(),
    )
}

fn c14_exponential_decay(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all(
        (1..=5)
            .map(|s| {
                let mut sc = practical_scenario(s, 0.0);
                sc.diagnostics.decay_final_bound = 1e-6;
                with_checks(sc, &[CheckName::Framework, CheckName::ExponentialDecay])
            })
            .collect(),
    )
}

/// Criterion 15: second-order sender run starting inside the quarter arc.
pub fn frequency_scenario(seed: u64) -> Scenario {
    let mut sc = scenario(format!("frequency-decay-seed{seed}"), seed, 8, dyadic_sender(), arc(0.45 * PI), 100.0);
    sc.frequencies = FrequencySpec::Uniform {
        diameter: 0.05,
        center: 0.0,
    };
    sc.integrator.second_order = true;
    sc.diagnostics.decay_max_rate = -1e-3;
    sc
}

fn c15_frequency_decay(ctx: &Ctx) -> Vec<CheckResult> {
    ctx.run_all((1..=5).map(|s| with_checks(frequency_scenario(s), &[CheckName::FrequencyDecay])).collect())
}

fn c16_trig(_ctx: &Ctx) -> Vec<CheckResult> {
    vec![diag::trig_lemma_checks(100_000, 16)]
}

/// A product-summable scenario wide enough to take the parallel row path.
fn wide_scenario() -> Scenario {
    scenario(
        "determinism-wide".into(),
        3,
        96,
        TopologySpec::ProductSummable {
            sequence: PositiveSequence::dyadic(),
        },
        arc(0.9 * PI),
        20.0,
    )
}

fn c17_determinism(ctx: &Ctx) -> Vec<CheckResult> {
    let scenarios = [remark_scenario(), practical_scenario(1, 0.05), wide_scenario()];
    let render = |threads: usize, sc: &Scenario| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let mut sc = sc.clone();
        sc.name = format!("{}-threads{threads}", sc.name);
        let (report, traj, _) = pool.install(|| ctx.run(&sc));
        match traj {
            Some(t) => Ok(render_csv(&t.diagnostics)),
            None => Err(report.error.unwrap_or_default()),
        }
    };
    scenarios
        .iter()
        .map(|sc| {
            let mut c = CheckResult::new(format!("{}/csv_identical", sc.name));
            match (render(1, sc), render(8, sc)) {
                (Ok(a), Ok(b)) => {
                    c.measure("bytes", a.len() as f64);
                    c.observe(if a == b { 0.0 } else { -1.0 });
                    if a != b {
                        let line = a.lines().zip(b.lines()).position(|(x, y)| x != y).unwrap_or(0);
                        c.note(format!("first differing line {}", line + 1));
                    }
                    c.finish()
                }
                (Err(e), _) | (_, Err(e)) => c.failed(e),
            }
        })
        .collect()
}

/// Files written for one criterion, if any.
pub fn criterion_dir(out_dir: &Path, id: u8) -> PathBuf {
    out_dir.join(format!("criterion-{id:02}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_select_by_number_or_name() {
        let all = criteria();
        assert_eq!(all.len(), 17);
        let names = |f: &str| all.iter().filter(|c| c.matches(f)).map(|c| c.id).collect::<Vec<_>>();
        assert_eq!(names("cross_ratio"), vec![12]);
        assert_eq!(names("3"), vec![3]);
        assert_eq!(names("c13"), vec![13]);
        assert_eq!(names("criterion-7"), vec![7]);
        assert!(names("no-such-criterion").is_empty());
    }

    #[test]
    fn empty_match_is_an_empty_passing_report() {
        let report = acceptance_suite(Some("no-such-criterion"), &SuiteOptions::default());
        assert!(report.outcomes.is_empty());
        assert!(report.passed);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn acceptance_scenarios_validate() {
        for sc in [
            remark_scenario(),
            product_scenario(1, 200.0),
            sender_scenario(1),
            practical_scenario(1, 0.05),
            frequency_scenario(1),
            wide_scenario(),
        ] {
            sc.validate().unwrap();
        }
    }
}
