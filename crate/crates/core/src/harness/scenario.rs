//! Scenario files.
//!
//! A scenario is one TOML document describing a complete experiment. Unknown
//! keys are rejected, every omitted key takes a documented default, and the
//! resolved scenario (defaults included) is echoed into the run report.

use std::f64::consts::FRAC_PI_3;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    DEFAULT_CLASSIFY_TOL, DEFAULT_SYNC_SLACK, DEFAULT_SYNC_WINDOW,
};
use crate::dynamics::{IntegratorConfig, Method, Problem, DEFAULT_EQUILIBRIUM_TOL, DEFAULT_STEP_SAFETY};
use crate::ensemble::{FrequencyVector, PhaseState, TailModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::{CouplingMatrix, PositiveSequence, DEFAULT_SENDER_EPSILON};

/// Schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Default finite-difference step of the gradient check (`2^-14`).
pub const DEFAULT_FD_STEP: f64 = 1.0 / 16_384.0;

fn one() -> usize {
    1
}
fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn yes() -> bool {
    true
}
fn default_equilibrium_tol() -> f64 {
    DEFAULT_EQUILIBRIUM_TOL
}
fn default_tail_budget() -> f64 {
    1e-4
}
fn default_step_safety() -> f64 {
    DEFAULT_STEP_SAFETY
}
fn default_epsilon() -> f64 {
    DEFAULT_SENDER_EPSILON
}
fn default_amplitude() -> f64 {
    FRAC_PI_3
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Number of simulated oscillators `N`.
    pub truncation: usize,
    /// Record every `sample_stride`-th step (the last step is always recorded).
    #[serde(default = "one")]
    pub sample_stride: usize,
    #[serde(default = "default_equilibrium_tol")]
    pub equilibrium_tol: f64,
    /// Warn when `tail_bound(N) · t_end` exceeds this.
    #[serde(default = "default_tail_budget")]
    pub tail_budget: f64,
    #[serde(default)]
    pub tail: TailModel,
    pub topology: TopologySpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub frequencies: FrequencySpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// `[topology]`, tagged by `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    ProductSummable {
        sequence: PositiveSequence,
    },
    GeometricCross {
        base: f64,
    },
    Sender {
        sequence: PositiveSequence,
        #[serde(default = "yes")]
        normalized: bool,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        /// Keep only the first `N` weights and rescale them to unit sum, so
        /// the simulated network is exactly a finite sender network.
        #[serde(default)]
        renormalize_over_truncation: bool,
    },
    FiniteEmbedded {
        entries: Vec<Vec<f64>>,
    },
    UniformFinite {
        n: usize,
        strength: f64,
    },
}

/// `[initial]`, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Explicit {
        phases: Vec<f64>,
    },
    /// `θ_i = (−1)^i · amplitude`.
    Alternating {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Seeded uniform phases in `[center − width/2, center + width/2)`.
    UniformArc {
        width: f64,
        #[serde(default)]
        center: f64,
    },
    Constant {
        value: f64,
    },
}

/// `[frequencies]`, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrequencySpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// Seeded frequencies with diameter exactly `diameter`: oscillators 1
    /// and 2 sit at the two ends of the interval, the rest are uniform in it.
    Uniform {
        diameter: f64,
        #[serde(default)]
        center: f64,
    },
}

/// `[integrator]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub t_end: f64,
    /// Omit to use the stability bound itself.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "default_step_safety")]
    pub step_safety: f64,
    #[serde(default)]
    pub method: Method,
    /// Integrate the stacked `(Θ, 𝒲)` system of a sender network.
    #[serde(default)]
    pub second_order: bool,
}

/// Names of the checks a scenario can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Framework,
    ConstantDiameter,
    DiameterMonotone,
    CompleteSync,
    LyapunovIdentity,
    GradientFlow,
    PotentialRemainder,
    Lipschitz,
    DerivativeBounds,
    WeightedSumConserved,
    OrderParameterMonotone,
    PhaseQuantization,
    AsymptoticClass,
    CollisionAvoidance,
    CrossRatioConstant,
    PracticalSync,
    ExponentialDecay,
    FrequencyDecay,
    Equilibrium,
    TrigLemmas,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Framework => "framework",
            CheckName::ConstantDiameter => "constant_diameter",
            CheckName::DiameterMonotone => "diameter_monotone",
            CheckName::CompleteSync => "complete_sync",
            CheckName::LyapunovIdentity => "lyapunov_identity",
            CheckName::GradientFlow => "gradient_flow",
            CheckName::PotentialRemainder => "potential_remainder",
            CheckName::Lipschitz => "lipschitz",
            CheckName::DerivativeBounds => "derivative_bounds",
            CheckName::WeightedSumConserved => "weighted_sum_conserved",
            CheckName::OrderParameterMonotone => "order_parameter_monotone",
            CheckName::PhaseQuantization => "phase_quantization",
            CheckName::AsymptoticClass => "asymptotic_class",
            CheckName::CollisionAvoidance => "collision_avoidance",
            CheckName::CrossRatioConstant => "cross_ratio_constant",
            CheckName::PracticalSync => "practical_sync",
            CheckName::ExponentialDecay => "exponential_decay",
            CheckName::FrequencyDecay => "frequency_decay",
            CheckName::Equilibrium => "equilibrium",
            CheckName::TrigLemmas => "trig_lemmas",
        }
    }
}

/// Which index tuples feed the cross-ratio check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TupleSpec {
    /// `"all"`: every 4-subset of `1..=N`.
    Keyword(String),
    List(Vec<[usize; 4]>),
}

impl Default for TupleSpec {
    fn default() -> Self {
        TupleSpec::Keyword("all".to_string())
    }
}

macro_rules! defaults {
    ($($f:ident: $v:expr),* $(,)?) => {
        $( fn $f() -> f64 { $v } )*
    };
}
defaults! {
    d_diameter_tol: 1e-3,
    d_monotone_tol: 1e-9,
    d_sync_tol: 1e-4,
    d_conservation_tol: 1e-8,
    d_r_tol: 1e-9,
    d_dichotomy_tol: 1e-6,
    d_quantization_tol: 1e-3,
    d_classify_tol: DEFAULT_CLASSIFY_TOL,
    d_sync_window: DEFAULT_SYNC_WINDOW,
    d_sync_slack: DEFAULT_SYNC_SLACK,
    d_decay_final: 1e-6,
    d_decay_rate: -1e-3,
    d_fd_step: DEFAULT_FD_STEP,
}
fn d_pairs() -> usize {
    100
}
fn d_perturbations() -> usize {
    100
}
fn d_trig_samples() -> usize {
    100_000
}
fn d_framework_samples() -> usize {
    256
}

/// `[diagnostics]`: requested checks and their tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub checks: Vec<CheckName>,
    /// Target of the constant-diameter check; defaults to `D(Θ^in)`.
    #[serde(default)]
    pub diameter_target: Option<f64>,
    #[serde(default = "d_diameter_tol")]
    pub diameter_tol: f64,
    #[serde(default = "d_monotone_tol")]
    pub monotone_tol: f64,
    /// Bound on the final `‖Θ̇‖₂` for complete synchronization.
    #[serde(default = "d_sync_tol")]
    pub sync_tol: f64,
    #[serde(default = "d_conservation_tol")]
    pub conservation_tol: f64,
    #[serde(default = "d_r_tol")]
    pub r_tol: f64,
    #[serde(default = "d_dichotomy_tol")]
    pub dichotomy_tol: f64,
    #[serde(default = "d_quantization_tol")]
    pub quantization_tol: f64,
    #[serde(default = "d_classify_tol")]
    pub classify_tol: f64,
    #[serde(default)]
    pub cross_ratio_tuples: TupleSpec,
    #[serde(default = "d_sync_window")]
    pub sync_window: f64,
    #[serde(default = "d_sync_slack")]
    pub sync_slack: f64,
    #[serde(default = "d_decay_final")]
    pub decay_final_bound: f64,
    /// Largest admissible fitted rate of the frequency-diameter decay.
    #[serde(default = "d_decay_rate")]
    pub decay_max_rate: f64,
    #[serde(default = "d_fd_step")]
    pub fd_step: f64,
    #[serde(default = "d_pairs")]
    pub lipschitz_pairs: usize,
    #[serde(default = "d_perturbations")]
    pub perturbations: usize,
    #[serde(default = "d_trig_samples")]
    pub trig_samples: usize,
    #[serde(default = "d_framework_samples")]
    pub framework_samples: usize,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        toml::from_str("").expect("every diagnostics field has a default")
    }
}

/// `[output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; overridden by `--out`, falls back to `IKL_OUT_DIR`.
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub summary: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: None,
            csv: true,
            summary: true,
        }
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates scenario text.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// Structural and physical validation.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must be nonempty".into()));
        }
        if self.truncation == 0 {
            return Err(Error::Config("truncation must be ≥ 1".into()));
        }
        if self.sample_stride == 0 {
            return Err(Error::Config("sample_stride must be ≥ 1".into()));
        }
        if !(self.equilibrium_tol > 0.0 && self.equilibrium_tol.is_finite()) {
            return Err(Error::Config("equilibrium_tol must be finite and > 0".into()));
        }
        if self.integrator.second_order && !matches!(self.topology, TopologySpec::Sender { .. }) {
            return Err(Error::Config("integrator.second_order requires topology.family = \"sender\"".into()));
        }
        if let InitialSpec::Explicit { phases } = &self.initial {
            if phases.len() != self.truncation {
                return Err(Error::Config(format!(
                    "initial.phases has {} entries but truncation is {}",
                    phases.len(),
                    self.truncation
                )));
            }
        }
        if let TupleSpec::Keyword(word) = &self.diagnostics.cross_ratio_tuples {
            if word != "all" {
                return Err(Error::Config(format!(
                    "diagnostics.cross_ratio_tuples must be \"all\" or a list of 4-tuples, got {word:?}"
                )));
            }
        }
        self.build_problem().map(|_| ())
    }

    pub fn coupling(&self) -> Result<CouplingMatrix> {
        match &self.topology {
            TopologySpec::ProductSummable { sequence } => Ok(CouplingMatrix::product_summable(sequence.clone())),
            TopologySpec::GeometricCross { base } => CouplingMatrix::geometric_cross(*base),
            TopologySpec::Sender {
                sequence,
                normalized,
                epsilon,
                renormalize_over_truncation,
            } => {
                let seq = if *renormalize_over_truncation {
                    sequence.renormalized_prefix(self.truncation)?
                } else {
                    sequence.clone()
                };
                CouplingMatrix::sender_with_epsilon(seq, *normalized, *epsilon)
            }
            TopologySpec::FiniteEmbedded { entries } => {
                let n = entries.len();
                if let Some(row) = entries.iter().position(|r| r.len() != n) {
                    return Err(Error::Config(format!(
                        "topology.entries row {} has {} columns, expected {n}",
                        row + 1,
                        entries[row].len()
                    )));
                }
                CouplingMatrix::finite_embedded(n, entries.concat())
            }
            TopologySpec::UniformFinite { n, strength } => CouplingMatrix::uniform_finite(*n, *strength),
        }
    }

    pub fn initial_state(&self) -> Result<PhaseState> {
        let n = self.truncation;
        let phases = match &self.initial {
            InitialSpec::Explicit { phases } => phases.clone(),
            InitialSpec::Alternating { amplitude } => (1..=n)
                .map(|i| if i % 2 == 0 { *amplitude } else { -amplitude })
                .collect(),
            InitialSpec::UniformArc { width, center } => {
                if !(width.is_finite() && *width >= 0.0) {
                    return Err(Error::Config(format!("initial.width must be finite and ≥ 0, got {width}")));
                }
                rng::uniform_vec(self.seed, rng::streams::INITIAL_PHASES, n, center - width / 2.0, center + width / 2.0)
            }
            InitialSpec::Constant { value } => vec![*value; n],
        };
        PhaseState::with_tail(phases, 0.0, self.tail)
    }

    pub fn frequency_vector(&self) -> Result<FrequencyVector> {
        let n = self.truncation;
        match &self.frequencies {
            FrequencySpec::Zero => Ok(FrequencyVector::Homogeneous(0.0)),
            FrequencySpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config("frequencies.value must be finite".into()));
                }
                Ok(FrequencyVector::Homogeneous(*value))
            }
            FrequencySpec::Uniform { diameter, center } => {
                if !(diameter.is_finite() && *diameter >= 0.0) {
                    return Err(Error::Config(format!(
                        "frequencies.diameter must be finite and ≥ 0, got {diameter}"
                    )));
                }
                let (lo, hi) = (center - diameter / 2.0, center + diameter / 2.0);
                let mut nu = rng::uniform_vec(self.seed, rng::streams::FREQUENCIES, n, lo, hi);
                match n {
                    1 => nu[0] = *center,
                    _ => {
                        nu[0] = lo;
                        nu[1] = hi;
                    }
                }
                FrequencyVector::per_index(nu)
            }
        }
    }

    /// The resolved integrator configuration.
    pub fn integrator_config(&self, k: &CouplingMatrix, nu: &FrequencyVector) -> Result<IntegratorConfig> {
        let cfg = IntegratorConfig::new(
            self.integrator.step,
            self.integrator.t_end,
            self.integrator.step_safety,
            k.norm_inf_one(),
            nu.sup_norm(self.truncation),
        );
        cfg.map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::Config(format!("integrator.{name}: {reason}")),
            other => other,
        })
    }

    /// Cross-ratio tuples requested by the diagnostics section.
    pub fn tuples(&self) -> Vec<[usize; 4]> {
        match &self.diagnostics.cross_ratio_tuples {
            TupleSpec::List(list) => list.clone(),
            TupleSpec::Keyword(_) => crate::diagnostics::all_tuples(self.truncation),
        }
    }

    pub fn requests(&self, check: CheckName) -> bool {
        self.diagnostics.checks.contains(&check)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let k = self.coupling().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::Config(format!("topology.{name}: {reason}")),
            other => other,
        })?;
        let nu = self.frequency_vector()?;
        let initial = self.initial_state().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::Config(format!("initial.{name}: {reason}")),
            other => other,
        })?;
        let integrator = self.integrator_config(&k, &nu)?;
        let tuples = if self.requests(CheckName::CrossRatioConstant) {
            self.tuples()
        } else {
            Vec::new()
        };
        Ok(Problem {
            topology: k,
            nu,
            initial,
            integrator,
            sample_stride: self.sample_stride,
            equilibrium_tol: self.equilibrium_tol,
            second_order: self.integrator.second_order,
            cross_ratio_tuples: tuples,
        })
    }

    /// SHA-256 of the canonical JSON form, excluding `name` and `output`.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut value = serde_json::to_value(self).expect("scenarios serialize");
        if let Some(map) = value.as_object_mut() {
            map.remove("name");
            map.remove("output");
        }
        let canonical = serde_json::to_string(&value).expect("values serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Serialized back to TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_SENDER: &str = r#"
name = "minimal"
truncation = 16

[topology]
family = "sender"
sequence = { kind = "geometric", ratio = 0.5, scale = 0.5 }

[initial]
kind = "uniform_arc"
width = 2.0

[integrator]
t_end = 10.0
"#;

    #[test]
    fn minimal_sender_gets_automatic_step() {
        let sc = parse_scenario_str(MINIMAL_SENDER).unwrap();
        let problem = sc.build_problem().unwrap();
        assert_eq!(problem.integrator.step, 0.05);
        assert_eq!(sc.sample_stride, 1);
        assert_eq!(sc.diagnostics.fd_step, DEFAULT_FD_STEP);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL_SENDER.replace("truncation = 16", "truncation = 16\nbogus = 1");
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("bogus")), "{err}");

        let text = MINIMAL_SENDER.replace("width = 2.0", "width = 2.0\nwdith = 1.0");
        assert!(matches!(parse_scenario_str(&text), Err(Error::Config(m)) if m.contains("wdith")));
    }

    #[test]
    fn malformed_family_names_the_field() {
        let text = MINIMAL_SENDER.replace("family = \"sender\"", "family = \"senders\"");
        let err = parse_scenario_str(&text).unwrap_err();
        let Error::Config(msg) = err else { panic!("expected a config error") };
        assert!(msg.contains("senders") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn step_bound_violation_is_a_validation_error() {
        let text = MINIMAL_SENDER.replace("t_end = 10.0", "t_end = 10.0\nstep = 0.2");
        assert!(matches!(parse_scenario_str(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn hash_ignores_name_and_output_only() {
        let a = parse_scenario_str(MINIMAL_SENDER).unwrap();
        let mut b = a.clone();
        b.name = "other".into();
        b.output.directory = Some("/tmp/x".into());
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 1;
        assert_ne!(a.config_hash(), b.config_hash());
        // Writing a default explicitly does not change the hash.
        let explicit = MINIMAL_SENDER.replace("truncation = 16", "truncation = 16\nsample_stride = 1");
        assert_eq!(a.config_hash(), parse_scenario_str(&explicit).unwrap().config_hash());
    }

    #[test]
    fn round_trips_through_toml() {
        let a = parse_scenario_str(MINIMAL_SENDER).unwrap();
        let b = parse_scenario_str(&a.to_toml()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_frequencies_hit_the_diameter() {
        let text = format!("{MINIMAL_SENDER}\n[frequencies]\nkind = \"uniform\"\ndiameter = 0.05\n");
        let sc = parse_scenario_str(&text).unwrap();
        let nu = sc.frequency_vector().unwrap();
        assert!((nu.diameter(16) - 0.05).abs() < 1e-17);
    }

    #[test]
    fn initial_data_is_prefix_stable() {
        let a = parse_scenario_str(MINIMAL_SENDER).unwrap();
        let mut b = a.clone();
        b.truncation = 40;
        let (pa, pb) = (a.initial_state().unwrap(), b.initial_state().unwrap());
        assert_eq!(pa.phases(), &pb.phases()[..16]);
    }
}
