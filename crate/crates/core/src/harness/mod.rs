//! Scenario files, runs with CSV/JSON output, and the acceptance suite.

pub mod acceptance;
pub mod run;
pub mod scenario;

pub use acceptance::{acceptance_suite, CriterionOutcome, SuiteOptions, SuiteReport};
pub use run::{run, run_with_trajectory, RunReport};
pub use scenario::{parse_scenario, parse_scenario_str, CheckName, Scenario};
