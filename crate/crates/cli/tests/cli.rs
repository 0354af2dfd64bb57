use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ikl() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ikl"));
    cmd.env_remove("IKL_OUT_DIR");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary(dir: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{name}.summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = ikl()
        .args(["simulate", scenario("constant-diameter.toml").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).starts_with("PASS constant-diameter"));
    let csv = std::fs::read_to_string(dir.path().join("constant-diameter.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,d_theta,d_omega,r,phi,P,S,rhs_l2,rhs_linf,tail_cert"));
    let json = summary(dir.path(), "constant-diameter");
    assert_eq!(json["passed"], true);
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn env_var_sets_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = ikl()
        .env("IKL_OUT_DIR", dir.path())
        .args(["simulate", scenario("frequency-decay.toml").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(dir.path().join("frequency-decay.csv").exists());
}

#[test]
fn seed_override_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let hash = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        let out = ikl()
            .args(["simulate", scenario("cross-ratio.toml").to_str().unwrap(), "--seed", seed, "--out"])
            .arg(&d)
            .output()
            .unwrap();
        assert!(out.status.code().is_some());
        summary(&d, "cross-ratio")["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash("1", "a"), hash("2", "b"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = |threads: &str| {
        let d = dir.path().join(format!("t{threads}"));
        let out = ikl()
            .args(["simulate", scenario("power-law-frozen-tail.toml").to_str().unwrap(), "--threads", threads, "--out"])
            .arg(&d)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stdout(&out));
        std::fs::read(d.join("power-law-frozen-tail.csv")).unwrap()
    };
    assert_eq!(csv("1"), csv("8"));
}

#[test]
fn bad_configs_exit_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\ntruncation = 4\n[topology]\nfamily = \"nope\"\n").unwrap();
    let out = ikl().args(["simulate"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope") && err.contains("bad.toml"), "{err}");
}

#[test]
fn failing_checks_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fail.toml");
    std::fs::write(
        &path,
        "name = \"fail\"\ntruncation = 4\n[topology]\nfamily = \"geometric_cross\"\nbase = 3.0\n\
         [initial]\nkind = \"alternating\"\n[integrator]\nt_end = 1.0\n\
         [diagnostics]\nchecks = [\"constant_diameter\"]\ndiameter_target = 1.0\n",
    )
    .unwrap();
    let out = ikl().args(["simulate"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("FAIL fail"));
}

#[test]
fn accept_with_unmatched_filter_warns_and_succeeds() {
    let out = ikl().args(["accept", "--filter", "no-such-criterion"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(stdout(&out).is_empty());
}

#[test]
fn accept_runs_a_single_criterion() {
    let out = ikl().args(["accept", "--filter", "trig"]).output().unwrap();
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("PASS criterion 16"));
}

#[test]
fn validate_and_norms_report() {
    let out = ikl().args(["validate", scenario("sender-practical.toml").to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["f1_holds"], true);
    assert_eq!(json["f2_holds"], true);
    assert_eq!(json["f3_holds"], true);

    let out = ikl().args(["norms", scenario("product-sync.toml").to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("product_summable"));
    assert!(text.contains("← N"));
}
