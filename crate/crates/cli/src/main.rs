//! `ikl`: run scenarios, the acceptance suite, and framework/norm reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ikl_core::diagnostics::{CheckResult, CheckStatus};
use ikl_core::harness::acceptance::{acceptance_suite, SuiteOptions};
use ikl_core::harness::run::{resolve_out_dir, summary_line};
use ikl_core::harness::{parse_scenario, run, Scenario};
use ikl_core::Error;

/// Default output root when neither `--out`, `[output] directory` nor
/// `IKL_OUT_DIR` is given.
const DEFAULT_OUT: &str = "ikl-out";

#[derive(Parser)]
#[command(name = "ikl", version, about = "Infinite Kuramoto model laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Output directory (overrides the scenario and IKL_OUT_DIR).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; affects wall-clock time only, never results.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario, run its checks, write CSV and JSON summary.
    Simulate {
        config: PathBuf,
        /// Print the full JSON report instead of one line per check.
        #[arg(long)]
        json: bool,
    },
    /// Run the acceptance suite.
    Accept {
        /// Only criteria whose number or name matches.
        #[arg(long, value_name = "PATTERN")]
        filter: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Print the framework report (F1–F3) of a scenario without integrating.
    Validate { config: PathBuf },
    /// Print coupling norms and the tail-bound table of a scenario.
    Norms { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads {n}: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Simulate { config, json } => simulate(&cli.global, config, *json),
        Command::Accept { filter, json } => accept(&cli.global, filter.as_deref(), *json),
        Command::Validate { config } => validate(&cli.global, config),
        Command::Norms { config } => norms(&cli.global, config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(global: &Global, path: &Path) -> Result<Scenario, Error> {
    let mut sc = parse_scenario(path)?;
    if let Some(seed) = global.seed {
        sc.seed = seed;
        sc.validate()?;
    }
    Ok(sc)
}

fn check_line(c: &CheckResult) -> String {
    let status = match c.status {
        CheckStatus::Pass => "pass",
        CheckStatus::Fail => "FAIL",
        CheckStatus::Flagged => "flagged",
        CheckStatus::NotApplicable => "n/a",
    };
    let mut s = format!("  {status:<8} {:<24} samples {:>7}", c.name, c.samples);
    if c.worst_margin.is_finite() {
        s.push_str(&format!("  worst margin {:.3e}", c.worst_margin));
    }
    if let Some(note) = c.notes.first() {
        s.push_str(&format!("  ({note})"));
    }
    s
}

fn simulate(global: &Global, config: &Path, json: bool) -> Result<ExitCode, Error> {
    let sc = load(global, config)?;
    let dir = resolve_out_dir(global.out.as_deref(), &sc).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let report = run(&sc, Some(&dir));
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?);
    } else {
        println!("{}", summary_line(&report));
        for c in &report.checks {
            println!("{}", check_line(c));
        }
        for w in &report.warnings {
            println!("  warning: {w}");
        }
        if let Some(p) = &report.csv_path {
            println!("  csv: {}", p.display());
        }
        if let Some(p) = &report.summary_path {
            println!("  summary: {}", p.display());
        }
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn accept(global: &Global, filter: Option<&str>, json: bool) -> Result<ExitCode, Error> {
    let out_dir = global
        .out
        .clone()
        .or_else(|| std::env::var_os(ikl_core::harness::run::OUT_DIR_ENV).map(PathBuf::from));
    let report = acceptance_suite(filter, &SuiteOptions { out_dir });
    if json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?);
    } else {
        for o in &report.outcomes {
            println!("{}", o.line());
        }
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn validate(global: &Global, config: &Path) -> Result<ExitCode, Error> {
    let sc = load(global, config)?;
    let problem = sc.build_problem()?;
    let report = problem
        .topology
        .validate_framework(&problem.initial, &problem.nu, sc.diagnostics.framework_samples);
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?);
    Ok(ExitCode::SUCCESS)
}

fn fmt(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.6e}")
    }
}

fn norms(global: &Global, config: &Path) -> Result<ExitCode, Error> {
    let sc = load(global, config)?;
    let k = sc.coupling()?;
    let n = sc.truncation;
    let minus = k.norm_minus_inf_one();
    println!("family            {}", k.family_name());
    println!("truncation N      {n}");
    println!("‖K‖_∞,1           {}", fmt(k.norm_inf_one()));
    println!(
        "‖K‖_-∞,1          {}{}",
        fmt(minus.value),
        if minus.f3_fails_in_limit { "  (vanishes over ℕ)" } else { "" }
    );
    for p in [1.0, 2.0] {
        println!("‖K‖_{p},1           {}   block: {}", fmt(k.norm_p_one(p)), fmt(k.block_norm_p_one(n, p)));
    }
    match k.tilde_kappa() {
        Ok(w) => println!("witness ‖κ̃‖₁      {}", fmt(w.total())),
        Err(e) => println!("witness           unavailable ({e})"),
    }
    println!();
    println!("{:>8}  {:>14}  {:>14}", "n", "tail_bound(n)", "× t_end");
    let mut sizes: Vec<usize> = std::iter::successors(Some(1usize), |m| m.checked_mul(2))
        .take_while(|&m| m < n)
        .collect();
    sizes.extend([n, 2 * n, 4 * n]);
    for m in sizes {
        let tb = k.tail_bound(m);
        let marker = if m == n { "  ← N" } else { "" };
        println!("{m:>8}  {:>14}  {:>14}{marker}", fmt(tb), fmt(tb * sc.integrator.t_end));
    }
    Ok(ExitCode::SUCCESS)
}
