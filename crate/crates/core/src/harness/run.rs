//! Executing a scenario: integrate, run the requested checks, write the
//! CSV time series and the JSON summary.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{CheckName, Scenario};
use crate::diagnostics::{self as diag, AsymptoticKind, CheckResult, CheckStatus, DiagnosticsRecord};
use crate::dynamics::{derivative_bounds_check, integrate, lipschitz_check, Problem, Trajectory};
use crate::ensemble::{lp_norm, PhaseState};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::FrameworkReport;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "IKL_OUT_DIR";

/// Header of the time-series CSV.
pub const CSV_HEADER: &str = "t,d_theta,d_omega,r,phi,P,S,rhs_l2,rhs_linf,tail_cert";

/// Outcome of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config_hash: String,
    /// `true` iff the run completed and no check failed.
    pub passed: bool,
    /// Set when the run could not be completed.
    pub error: Option<String>,
    pub checks: Vec<CheckResult>,
    pub framework: Option<FrameworkReport>,
    pub truncation: usize,
    pub step: Option<f64>,
    pub steps: Option<usize>,
    pub samples: usize,
    pub tail_bound: Option<f64>,
    pub tail_certificate: Option<f64>,
    pub equilibrium: Option<bool>,
    pub final_record: Option<DiagnosticsRecord>,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    /// The resolved scenario, defaults included.
    pub scenario: Scenario,
}

impl RunReport {
    pub fn check(&self, name: CheckName) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name.as_str())
    }

    fn aborted(scenario: &Scenario, err: &Error, started: Instant) -> Self {
        let checks = requested(scenario)
            .into_iter()
            .map(|c| CheckResult::new(c.as_str()).failed(format!("run aborted: {err}")))
            .collect();
        Self {
            name: scenario.name.clone(),
            config_hash: scenario.config_hash(),
            passed: false,
            error: Some(err.to_string()),
            checks,
            framework: None,
            truncation: scenario.truncation,
            step: None,
            steps: None,
            samples: 0,
            tail_bound: None,
            tail_certificate: None,
            equilibrium: None,
            final_record: None,
            warnings: Vec::new(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            csv_path: None,
            summary_path: None,
            scenario: scenario.clone(),
        }
    }
}

/// Output directory: the explicit argument, else `[output] directory`, else
/// `$IKL_OUT_DIR`. `None` means nothing is written.
pub fn resolve_out_dir(explicit: Option<&Path>, scenario: &Scenario) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| scenario.output.directory.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
}

/// Requested checks, first occurrence wins.
fn requested(scenario: &Scenario) -> Vec<CheckName> {
    let mut seen = Vec::new();
    for &c in &scenario.diagnostics.checks {
        if !seen.contains(&c) {
            seen.push(c);
        }
    }
    seen
}

/// Runs a scenario. Errors never escape: they become a failed report.
pub fn run(scenario: &Scenario, out_dir: Option<&Path>) -> RunReport {
    run_with_trajectory(scenario, out_dir).0
}

/// [`run`], also handing back the trajectory when integration succeeded.
pub fn run_with_trajectory(scenario: &Scenario, out_dir: Option<&Path>) -> (RunReport, Option<Trajectory>) {
    let started = Instant::now();
    let dir = resolve_out_dir(out_dir, scenario);
    let problem = match scenario.validate().and_then(|_| scenario.build_problem()) {
        Ok(p) => p,
        Err(e) => return (finalize(RunReport::aborted(scenario, &e, started), dir.as_deref(), None, started), None),
    };
    let traj = match integrate(&problem) {
        Ok(t) => t,
        Err(e) => return (finalize(RunReport::aborted(scenario, &e, started), dir.as_deref(), None, started), None),
    };

    let mut warnings = Vec::new();
    if traj.tail_certificate > scenario.tail_budget {
        warnings.push(format!(
            "tail certificate {} exceeds the budget {}; increase the truncation",
            traj.tail_certificate, scenario.tail_budget
        ));
    }
    if let crate::ensemble::TailModel::Frozen { .. } = scenario.tail {
        warnings.push("frozen tail: the tail certificate does not apply".to_string());
    }

    let framework = problem
        .topology
        .validate_framework(&problem.initial, &problem.nu, scenario.diagnostics.framework_samples);
    let checks: Vec<CheckResult> = requested(scenario)
        .into_iter()
        .map(|c| {
            let mut res = run_check(c, scenario, &problem, &traj, &framework);
            res.name = c.as_str().to_string();
            res
        })
        .collect();

    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    let report = RunReport {
        name: scenario.name.clone(),
        config_hash: scenario.config_hash(),
        passed,
        error: None,
        checks,
        framework: Some(framework),
        truncation: scenario.truncation,
        step: Some(traj.step),
        steps: Some(problem.integrator.steps),
        samples: traj.len(),
        tail_bound: Some(traj.tail_bound),
        tail_certificate: Some(traj.tail_certificate),
        equilibrium: Some(traj.equilibrium),
        final_record: traj.diagnostics.last().cloned(),
        warnings,
        wall_clock_seconds: 0.0,
        csv_path: None,
        summary_path: None,
        scenario: scenario.clone(),
    };
    let report = finalize(report, dir.as_deref(), Some(&traj), started);
    (report, Some(traj))
}

fn finalize(mut report: RunReport, dir: Option<&Path>, traj: Option<&Trajectory>, started: Instant) -> RunReport {
    let Some(dir) = dir else {
        report.wall_clock_seconds = started.elapsed().as_secs_f64();
        return report;
    };
    let stem = file_stem(&report.name);
    if let Err(e) = std::fs::create_dir_all(dir) {
        return io_failure(report, started, format!("{}: {e}", dir.display()));
    }
    if let (Some(traj), true) = (traj, report.scenario.output.csv) {
        let path = dir.join(format!("{stem}.csv"));
        match write_csv(&path, &traj.diagnostics) {
            Ok(()) => report.csv_path = Some(path),
            Err(e) => return io_failure(report, started, e.to_string()),
        }
    }
    if report.scenario.output.summary {
        let path = dir.join(format!("{stem}.summary.json"));
        report.summary_path = Some(path.clone());
        report.wall_clock_seconds = started.elapsed().as_secs_f64();
        if let Err(e) = write_summary(&path, &report) {
            report.summary_path = None;
            return io_failure(report, started, e.to_string());
        }
    }
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    report
}

fn io_failure(mut report: RunReport, started: Instant, msg: String) -> RunReport {
    report.passed = false;
    report.error = Some(format!("output: {msg}"));
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    report
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn write_summary(path: &Path, report: &RunReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Shortest representation that parses back to the same `f64`; plain
/// decimal in `[1e-5, 1e16)`, scientific otherwise.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// One CSV row; absent values are empty fields.
pub fn csv_row(rec: &DiagnosticsRecord) -> String {
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    let mut line = String::new();
    let _ = write!(
        line,
        "{},{},{},{},{},{},{},{},{},{}",
        format_f64(rec.t),
        format_f64(rec.d_theta),
        opt(rec.d_omega),
        format_f64(rec.r),
        opt(rec.phi),
        opt(rec.potential),
        opt(rec.weighted_sum),
        format_f64(rec.rhs_l2),
        format_f64(rec.rhs_linf),
        format_f64(rec.tail_cert),
    );
    line
}

/// The full CSV document, exactly as [`write_csv`] writes it.
pub fn render_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&csv_row(rec));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}")?;
    for rec in records {
        writeln!(w, "{}", csv_row(rec))?;
    }
    w.flush()?;
    Ok(())
}

/// Combines several partial results into one named check.
fn merge(name: &str, parts: Vec<CheckResult>) -> CheckResult {
    let mut out = CheckResult::new(name);
    if parts.is_empty() {
        return out.not_applicable();
    }
    let all_na = parts.iter().all(|p| p.status == CheckStatus::NotApplicable);
    let any_fail = parts.iter().any(|p| p.status == CheckStatus::Fail);
    let any_flag = parts.iter().any(|p| p.status == CheckStatus::Flagged);
    for p in parts {
        out.samples += p.samples;
        out.violations += p.violations;
        if p.worst_margin < out.worst_margin || p.worst_margin.is_nan() {
            out.worst_margin = p.worst_margin;
        }
        for (k, v) in p.measured {
            out.measured.insert(format!("{}.{k}", p.name), v);
        }
        out.notes.extend(p.notes.into_iter().map(|n| format!("{}: {n}", p.name)));
    }
    out.status = if any_fail || out.violations > 0 {
        CheckStatus::Fail
    } else if all_na {
        CheckStatus::NotApplicable
    } else if any_flag {
        CheckStatus::Flagged
    } else {
        CheckStatus::Pass
    };
    out
}

/// Seeded perturbations `h` with `‖h‖₂ < 1/√2`.
pub fn seeded_perturbations(seed: u64, n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut g = rng::stream(seed, rng::streams::PERTURBATIONS);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..n).map(|_| g.gen::<f64>() * 2.0 - 1.0).collect();
            let radius = g.gen::<f64>() * FRAC_1_SQRT_2 * (1.0 - 1e-9);
            let norm = lp_norm(&dir, 2.0);
            if norm == 0.0 {
                vec![0.0; n]
            } else {
                dir.into_iter().map(|x| x * radius / norm).collect()
            }
        })
        .collect()
}

/// Seeded pairs of phase vectors, uniform in `[−π, π)^n`.
pub fn seeded_pairs(seed: u64, n: usize, count: usize) -> Vec<(PhaseState, PhaseState)> {
    let mut g = rng::stream(seed, rng::streams::PAIRS);
    let mut draw = || {
        let v = (0..n).map(|_| (g.gen::<f64>() * 2.0 - 1.0) * PI).collect();
        PhaseState::new(v).expect("finite draws")
    };
    (0..count).map(|_| (draw(), draw())).collect()
}

fn run_check(
    name: CheckName,
    sc: &Scenario,
    problem: &Problem,
    traj: &Trajectory,
    framework: &FrameworkReport,
) -> CheckResult {
    let d = &sc.diagnostics;
    let k = &problem.topology;
    let n = sc.truncation;
    match name {
        CheckName::Framework => {
            let mut c = CheckResult::new(name.as_str());
            c.measure("initial_diameter", framework.initial_diameter);
            c.measure("k_minus", framework.k_minus);
            if let Some(l1) = framework.witness_l1 {
                c.measure("witness_l1", l1);
            }
            c.measure("f2_pairs_checked", framework.f2_pairs_checked as f64);
            for (label, holds) in [("F1", framework.f1_holds), ("F2", framework.f2_holds), ("F3", framework.f3_holds)] {
                if !holds {
                    c.note(format!("{label} does not hold"));
                }
            }
            c.notes.extend(framework.notes.iter().cloned());
            if framework.f1_holds && framework.f2_holds && framework.f3_holds {
                c
            } else {
                c.flagged()
            }
        }
        CheckName::ConstantDiameter => {
            let target = d.diameter_target.unwrap_or_else(|| problem.initial.diameter());
            diag::constant_diameter_check(traj, target, d.diameter_tol)
        }
        CheckName::DiameterMonotone => diag::diameter_monotonicity_check(traj, d.monotone_tol),
        CheckName::CompleteSync => {
            let mut c = CheckResult::new(name.as_str());
            let last = traj.diagnostics.last().expect("nonempty");
            c.measure("final_rhs_l2", last.rhs_l2);
            c.measure("bound", d.sync_tol);
            c.observe(d.sync_tol - last.rhs_l2);
            c.finish()
        }
        CheckName::LyapunovIdentity => diag::lyapunov_identity_check(traj, k),
        CheckName::GradientFlow => merge(
            name.as_str(),
            vec![
                rename(diag::gradient_check(&problem.initial, k, d.fd_step), "initial"),
                rename(diag::gradient_check(traj.last_state(), k, d.fd_step), "final"),
            ],
        ),
        CheckName::PotentialRemainder => {
            let hs = seeded_perturbations(sc.seed, n, d.perturbations);
            diag::potential_remainder_check(&problem.initial, k, &hs)
        }
        CheckName::Lipschitz => {
            let pairs = seeded_pairs(sc.seed, n, d.lipschitz_pairs);
            let parts = [1.0, 2.0, f64::INFINITY]
                .into_iter()
                .map(|p| {
                    let per: Vec<CheckResult> =
                        pairs.iter().map(|(a, b)| lipschitz_check(k, &problem.nu, a, b, p)).collect();
                    let label = per.first().map(|c| c.name.clone()).unwrap_or_default();
                    merge(&label, per.into_iter().map(|c| rename(c, "pair")).collect())
                })
                .collect();
            merge(name.as_str(), parts)
        }
        CheckName::DerivativeBounds => derivative_bounds_check(traj, k, &problem.nu),
        CheckName::WeightedSumConserved => diag::weighted_sum_conservation_check(traj, d.conservation_tol),
        CheckName::OrderParameterMonotone => diag::r_monotonicity_check(traj, k, d.r_tol, d.dichotomy_tol),
        CheckName::PhaseQuantization => diag::phase_quantization_check(traj, d.quantization_tol),
        CheckName::AsymptoticClass => asymptotic_class(name, problem, traj, d.classify_tol),
        CheckName::CollisionAvoidance => diag::collision_avoidance_check(traj),
        CheckName::CrossRatioConstant => diag::cross_ratio_constancy_check(traj, &sc.tuples()),
        CheckName::PracticalSync => practical_sync(name, problem, traj, framework, d.sync_window, d.sync_slack),
        CheckName::ExponentialDecay => diag::exponential_decay_check(traj, d.decay_final_bound),
        CheckName::FrequencyDecay => match diag::frequency_decay_check(traj, k, d.decay_max_rate) {
            Ok(c) => c,
            Err(e @ Error::NoEntranceTime { .. }) => {
                let mut c = CheckResult::new(name.as_str());
                c.note(e.to_string());
                c.flagged()
            }
            Err(e) => CheckResult::new(name.as_str()).failed(e.to_string()),
        },
        CheckName::Equilibrium => {
            let mut c = CheckResult::new(name.as_str());
            let last = traj.diagnostics.last().expect("nonempty");
            c.measure("final_rhs_linf", last.rhs_linf);
            c.observe(sc.equilibrium_tol - last.rhs_linf);
            c.finish()
        }
        CheckName::TrigLemmas => diag::trig_lemma_checks(d.trig_samples, sc.seed),
    }
}

fn rename(mut c: CheckResult, name: &str) -> CheckResult {
    c.name = name.to_string();
    c
}

fn asymptotic_class(name: CheckName, problem: &Problem, traj: &Trajectory, tol: f64) -> CheckResult {
    let mut c = CheckResult::new(name.as_str());
    let Some(kappa) = problem.topology.sender_weights() else {
        c.note("requires a sender network");
        return c.not_applicable();
    };
    if !problem.nu.is_homogeneous() {
        c.note("requires homogeneous frequencies");
        return c.not_applicable();
    }
    let theta0 = crate::ensemble::weighted_sum(&problem.initial, kappa);
    c.measure("theta0", theta0);
    match diag::classify_asymptotic(traj, kappa, theta0, tol) {
        Ok(class) => {
            c.measure("sync_residual", class.sync_residual);
            c.measure("bicluster_residual", class.bicluster_residual);
            match class.kind {
                AsymptoticKind::FullSync { theta_limit } => {
                    c.note("full_sync");
                    c.measure("theta_limit", theta_limit);
                    c.observe(tol - class.sync_residual);
                    c.finish()
                }
                AsymptoticKind::BiCluster { outlier, sign } => {
                    c.note(format!("bi_cluster: outlier {outlier}, sign {sign:+}"));
                    c.measure("outlier", outlier as f64);
                    c.measure("sign", f64::from(sign));
                    c.finish()
                }
                AsymptoticKind::Unresolved => {
                    c.note("unresolved: the final state matches no candidate configuration");
                    c.flagged()
                }
            }
        }
        Err(e) => {
            c.note(e.to_string());
            c.flagged()
        }
    }
}

fn practical_sync(
    name: CheckName,
    problem: &Problem,
    traj: &Trajectory,
    framework: &FrameworkReport,
    window: f64,
    slack: f64,
) -> CheckResult {
    let mut c = CheckResult::new(name.as_str());
    if !(framework.f1_holds && framework.f2_holds && framework.f3_holds) {
        c.note("framework hypotheses do not all hold");
        c.notes.extend(framework.notes.iter().cloned());
        return c.not_applicable();
    }
    let Some(l1) = framework.witness_l1 else {
        c.note("no witness sequence");
        return c.not_applicable();
    };
    let n = problem.initial.truncation();
    let d_nu = problem.nu.diameter(n);
    let gamma = match diag::practical_sync_gamma(d_nu, l1, framework.k_minus) {
        Ok(g) => g,
        Err(e) => {
            c.note(e.to_string());
            return c.not_applicable();
        }
    };
    let d0 = framework.initial_diameter;
    if !(gamma < d0 && d0 < PI - gamma) {
        c.note(format!("initial diameter {d0} outside (γ, π − γ) with γ = {gamma}"));
        c.measure("gamma", gamma);
        return c.not_applicable();
    }
    diag::practical_sync_check(traj, gamma, window, slack)
}

/// Summary line for terminal output.
pub fn summary_line(report: &RunReport) -> String {
    let mut s = format!(
        "{} {} ({} checks, {:.2}s)",
        if report.passed { "PASS" } else { "FAIL" },
        report.name,
        report.checks.len(),
        report.wall_clock_seconds
    );
    if let Some(e) = &report.error {
        let _ = write!(s, ": {e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::parse_scenario_str;

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.0, 1.0, -2.5, PI, 1e-20, 3.0f64.powi(-21), 1e300, 123456.789, f64::MIN_POSITIVE] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_f64(0.05), "0.05");
        assert_eq!(format_f64(1e-20), "1e-20");
    }

    #[test]
    fn absent_fields_are_empty() {
        let rec = DiagnosticsRecord {
            t: 0.5,
            d_theta: 1.0,
            d_omega: None,
            r: 0.25,
            phi: None,
            potential: Some(0.125),
            weighted_sum: None,
            cross_ratios: None,
            rhs_l2: 2.0,
            rhs_linf: 1.5,
            tail_cert: 0.0,
        };
        assert_eq!(csv_row(&rec), "0.5,1,,0.25,,0.125,,2,1.5,0");
        assert_eq!(CSV_HEADER.split(',').count(), csv_row(&rec).split(',').count());
    }

    #[test]
    fn zero_coupling_conservation_is_trivial() {
        let sc = parse_scenario_str(
            r#"
name = "zero-coupling"
truncation = 5
[topology]
family = "uniform_finite"
n = 5
strength = 0.0
[initial]
kind = "uniform_arc"
width = 1.0
[integrator]
t_end = 1.0
[diagnostics]
checks = ["diameter_monotone", "weighted_sum_conserved", "lyapunov_identity", "constant_diameter", "equilibrium"]
"#,
        );
        let report = run(&sc.unwrap(), None);
        assert!(report.passed, "{report:#?}");
        for c in &report.checks {
            assert_eq!(c.status, CheckStatus::Pass, "{c:#?}");
        }
    }

    #[test]
    fn integration_errors_become_failed_reports() {
        let sc = parse_scenario_str(
            r#"
name = "second-order-not-sender"
truncation = 4
[topology]
family = "geometric_cross"
base = 3.0
[initial]
kind = "alternating"
[integrator]
t_end = 1.0
"#,
        )
        .unwrap();
        let mut bad = sc.clone();
        bad.integrator.second_order = true;
        bad.diagnostics.checks = vec![CheckName::Equilibrium, CheckName::Equilibrium];
        let report = run(&bad, None);
        assert!(!report.passed);
        assert!(report.error.is_some());
        assert_eq!(report.checks.len(), 1);
        assert_eq!(report.checks[0].status, CheckStatus::Fail);
    }

    #[test]
    fn missing_quarter_arc_entry_is_flagged() {
        let sc = parse_scenario_str(
            r#"
name = "no-entry"
truncation = 3
[topology]
family = "sender"
sequence = { kind = "explicit", values = [0.5, 0.25, 0.25] }
[initial]
kind = "explicit"
phases = [0.0, 3.141592653589793, -3.141592653589793]
[integrator]
t_end = 2.0
second_order = true
[diagnostics]
checks = ["frequency_decay"]
"#,
        )
        .unwrap();
        let report = run(&sc, None);
        assert_eq!(report.checks[0].status, CheckStatus::Flagged, "{report:#?}");
        assert!(report.passed);
    }

    #[test]
    fn writes_csv_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let sc = parse_scenario_str(
            r#"
name = "files"
truncation = 6
[topology]
family = "geometric_cross"
base = 3.0
[initial]
kind = "alternating"
[integrator]
t_end = 1.0
step = 0.1
[diagnostics]
checks = ["constant_diameter"]
"#,
        )
        .unwrap();
        let report = run(&sc, Some(dir.path()));
        let csv = std::fs::read_to_string(report.csv_path.as_ref().unwrap()).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 11);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(report.summary_path.as_ref().unwrap()).unwrap()).unwrap();
        assert_eq!(json["config_hash"], report.config_hash);
        assert_eq!(json["checks"][0]["status"], "pass");
    }
}
