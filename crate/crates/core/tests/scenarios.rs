//! End-to-end runs of small scenarios through the harness.

use std::f64::consts::PI;
use std::path::PathBuf;

use ikl_core::diagnostics::CheckStatus;
use ikl_core::dynamics::{integrate, Problem};
use ikl_core::ensemble::{FrequencyVector, PhaseState};
use ikl_core::harness::run::render_csv;
use ikl_core::harness::{parse_scenario, parse_scenario_str, run, run_with_trajectory, CheckName};
use ikl_core::topology::CouplingMatrix;

fn shipped() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

const REMARK: &str = r#"
name = "remark"
truncation = 20
[topology]
family = "geometric_cross"
base = 3.0
[initial]
kind = "alternating"
[integrator]
t_end = 50.0
step = 0.05
[diagnostics]
checks = ["constant_diameter"]
diameter_target = 2.0943951023931953
"#;

#[test]
fn shipped_scenarios_parse() {
    let files = shipped();
    assert!(files.len() >= 5);
    for f in files {
        parse_scenario(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}

/// Alternating ±π/3 phases under 3^{-(i+j)} coupling: the diameter is 2π/3
/// initially and never moves away from it.
#[test]
fn geometric_cross_diameter_stays_at_two_thirds_pi() {
    let n = 20;
    let init: Vec<f64> = (1..=n).map(|i| if i % 2 == 0 { PI / 3.0 } else { -PI / 3.0 }).collect();
    let k = CouplingMatrix::geometric_cross(3.0).unwrap();
    let p = Problem::new(k, FrequencyVector::Homogeneous(0.0), PhaseState::new(init).unwrap(), 50.0)
        .unwrap()
        .with_step(0.05)
        .unwrap();
    let traj = integrate(&p).unwrap();
    for state in &traj.states {
        let th = state.phases();
        let d = th.iter().cloned().fold(f64::MIN, f64::max) - th.iter().cloned().fold(f64::MAX, f64::min);
        assert!((d - 2.0 * PI / 3.0).abs() < 1e-3, "t = {}: D = {d}", state.time());
        // The last alternating pair barely moves: |θ_20 − θ_19| ≥ 2π/3 − 2t/3^{18}.
        let pair = (th[19] - th[18]).abs();
        assert!(pair >= 2.0 * PI / 3.0 - 2.0 * state.time() / 3f64.powi(18) - 1e-12);
    }
}

#[test]
fn remark_report_contains_constant_diameter_pass() {
    let report = run(&parse_scenario_str(REMARK).unwrap(), None);
    let c = report.check(CheckName::ConstantDiameter).unwrap();
    assert_eq!(c.status, CheckStatus::Pass);
    assert!(report.tail_certificate.unwrap() < 1e-4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let sc = parse_scenario_str(REMARK).unwrap();
    let (_, a) = run_with_trajectory(&sc, None);
    let (_, b) = run_with_trajectory(&sc, None);
    assert_eq!(render_csv(&a.unwrap().diagnostics), render_csv(&b.unwrap().diagnostics));
}

#[test]
fn semantic_edits_change_the_hash() {
    let base = parse_scenario_str(REMARK).unwrap();
    let mut edits = Vec::new();
    let mut s = base.clone();
    s.truncation = 21;
    edits.push(s);
    let mut s = base.clone();
    s.integrator.t_end = 40.0;
    edits.push(s);
    let mut s = base.clone();
    s.diagnostics.diameter_tol = 2e-3;
    edits.push(s);
    let mut s = base.clone();
    s.diagnostics.checks.push(CheckName::DiameterMonotone);
    edits.push(s);
    for e in edits {
        assert_ne!(e.config_hash(), base.config_hash());
    }
}

#[test]
fn csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&parse_scenario_str(REMARK).unwrap(), Some(dir.path()));
    let text = std::fs::read_to_string(report.csv_path.unwrap()).unwrap();
    assert_eq!(text.lines().count(), report.samples + 1);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("50,"), "{last}");
    // P is present (symmetric summable), S is present (unit weights).
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields.len(), 10);
    assert!(fields[2].is_empty(), "no frequency diameter on first-order runs");
    assert!(!fields[5].is_empty() && !fields[6].is_empty());
}
