//! Lazy infinite coupling matrices.
//!
//! A [`CouplingMatrix`] is never materialized. Each family carries closed-form
//! row sums, norms and tail sums, so a finite truncation can always be
//! certified against the infinite system. Indices are 1-based throughout the
//! public API.

use serde::{Deserialize, Serialize};

use crate::ensemble::{FrequencyVector, PhaseState};
use crate::error::{Error, Result};
use crate::summation::{neumaier_sum, NeumaierSum};

/// Default regularization used by the sender witness `κ_j / (‖K‖ + ε)`.
pub const DEFAULT_SENDER_EPSILON: f64 = 1.0 / 1_048_576.0; // 2^-20

/// Number of leading terms summed directly before the Euler–Maclaurin tail
/// takes over for power-law sequences.
const POWER_LAW_DIRECT_TERMS: usize = 256;

/// Largest index probed by the sampled framework checks on infinite supports.
const SAMPLE_INDEX_CAP: usize = 256;

/// Generator family of a nonnegative summable sequence `a_1, a_2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceFamily {
    /// `a_i = scale · ratio^(i-1)`.
    Geometric { ratio: f64, scale: f64 },
    /// `a_i = scale · i^(-exponent)`.
    PowerLaw { exponent: f64, scale: f64 },
    /// Finitely many positive values, zero beyond the list.
    Explicit { values: Vec<f64> },
}

/// A summable sequence with computable totals and tails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceFamily", into = "SequenceFamily")]
pub struct PositiveSequence {
    family: SequenceFamily,
}

impl TryFrom<SequenceFamily> for PositiveSequence {
    type Error = Error;

    fn try_from(family: SequenceFamily) -> Result<Self> {
        match family {
            SequenceFamily::Geometric { ratio, scale } => Self::geometric(ratio, scale),
            SequenceFamily::PowerLaw { exponent, scale } => Self::power_law(exponent, scale),
            SequenceFamily::Explicit { values } => Self::explicit(values),
        }
    }
}

impl From<PositiveSequence> for SequenceFamily {
    fn from(seq: PositiveSequence) -> Self {
        seq.family
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

impl PositiveSequence {
    pub fn geometric(ratio: f64, scale: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid("ratio", format!("must lie in (0,1), got {ratio}")));
        }
        check_positive("scale", scale)?;
        Ok(Self {
            family: SequenceFamily::Geometric { ratio, scale },
        })
    }

    pub fn power_law(exponent: f64, scale: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 1.0) {
            return Err(Error::invalid("exponent", format!("must be finite and > 1, got {exponent}")));
        }
        check_positive("scale", scale)?;
        Ok(Self {
            family: SequenceFamily::PowerLaw { exponent, scale },
        })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "explicit sequence must be nonempty"));
        }
        for &v in &values {
            check_positive("values", v)?;
        }
        if !neumaier_sum(values.iter().copied()).is_finite() {
            return Err(Error::invalid("values", "sum overflows"));
        }
        Ok(Self {
            family: SequenceFamily::Explicit { values },
        })
    }

    /// The `2^-i` sequence used throughout the examples.
    pub fn dyadic() -> Self {
        Self::geometric(0.5, 0.5).expect("valid parameters")
    }

    pub fn family(&self) -> &SequenceFamily {
        &self.family
    }

    /// Number of nonzero terms, or `None` for infinite support.
    pub fn support_len(&self) -> Option<usize> {
        match &self.family {
            SequenceFamily::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    /// `a_i` for `i ≥ 1`.
    pub fn term(&self, i: usize) -> f64 {
        assert!(i >= 1, "sequence indices are 1-based");
        match &self.family {
            SequenceFamily::Geometric { ratio, scale } => scale * ratio.powi(exponent_i32(i - 1)),
            SequenceFamily::PowerLaw { exponent, scale } => scale * (i as f64).powf(-exponent),
            SequenceFamily::Explicit { values } => values.get(i - 1).copied().unwrap_or(0.0),
        }
    }

    /// The first `n` terms `a_1..a_n`.
    pub fn prefix(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.term(i)).collect()
    }

    /// `Σ_{i≥1} a_i`.
    pub fn total(&self) -> f64 {
        self.tail(0)
    }

    /// `Σ_{i>n} a_i`; nonincreasing in `n`.
    pub fn tail(&self, n: usize) -> f64 {
        match &self.family {
            SequenceFamily::Geometric { ratio, scale } => {
                scale * ratio.powi(exponent_i32(n)) / (1.0 - ratio)
            }
            SequenceFamily::PowerLaw { exponent, scale } => scale * zeta_tail(*exponent, n),
            SequenceFamily::Explicit { values } => {
                neumaier_sum(values.iter().skip(n).copied())
            }
        }
    }

    /// `Σ_{i≤n} a_i`.
    pub fn partial(&self, n: usize) -> f64 {
        match &self.family {
            SequenceFamily::Explicit { values } => neumaier_sum(values.iter().take(n).copied()),
            _ => neumaier_sum((1..=n).map(|i| self.term(i))),
        }
    }

    /// `sup_i a_i`.
    pub fn sup(&self) -> f64 {
        match &self.family {
            SequenceFamily::Geometric { scale, .. } | SequenceFamily::PowerLaw { scale, .. } => *scale,
            SequenceFamily::Explicit { values } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// `max_{i≤n} a_i`.
    pub fn sup_prefix(&self, n: usize) -> f64 {
        match &self.family {
            SequenceFamily::Explicit { values } => {
                values.iter().take(n).copied().fold(0.0, f64::max)
            }
            _ if n == 0 => 0.0,
            _ => self.term(1),
        }
    }

    /// `inf_i a_i` over all of ℕ; zero for every family (decaying or padded).
    pub fn inf(&self) -> f64 {
        0.0
    }

    /// `‖a‖_p` for `p ∈ [1, ∞]`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "p must be ≥ 1");
        if p.is_infinite() {
            return self.sup();
        }
        let sum_p = match &self.family {
            SequenceFamily::Geometric { ratio, scale } => scale.powf(p) / (1.0 - ratio.powf(p)),
            SequenceFamily::PowerLaw { exponent, scale } => {
                scale.powf(p) * zeta_tail(exponent * p, 0)
            }
            SequenceFamily::Explicit { values } => neumaier_sum(values.iter().map(|v| v.powf(p))),
        };
        sum_p.powf(1.0 / p)
    }

    /// The sequence multiplied termwise by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor.is_finite() && factor > 0.0, "scale factor must be positive");
        let family = match &self.family {
            SequenceFamily::Geometric { ratio, scale } => SequenceFamily::Geometric {
                ratio: *ratio,
                scale: scale * factor,
            },
            SequenceFamily::PowerLaw { exponent, scale } => SequenceFamily::PowerLaw {
                exponent: *exponent,
                scale: scale * factor,
            },
            SequenceFamily::Explicit { values } => SequenceFamily::Explicit {
                values: values.iter().map(|v| v * factor).collect(),
            },
        };
        Self { family }
    }

    /// Rescaled so that `Σ a_i = 1`.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.total())
    }

    /// The first `n` terms as an explicit sequence, rescaled to unit sum.
    pub fn renormalized_prefix(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "prefix length must be ≥ 1"));
        }
        let prefix = self.prefix(n);
        let total = neumaier_sum(prefix.iter().copied());
        Self::explicit(prefix.into_iter().map(|v| v / total).collect())
    }
}

fn exponent_i32(k: usize) -> i32 {
    i32::try_from(k).unwrap_or(i32::MAX)
}

/// `Σ_{i>n} i^{-s}` for `s > 1`: direct terms up to `m`, then an
/// Euler–Maclaurin remainder through the third derivative.
fn zeta_tail(s: f64, n: usize) -> f64 {
    let m = (n + 1).max(POWER_LAW_DIRECT_TERMS);
    let mut acc = NeumaierSum::new();
    for i in (n + 1)..m {
        acc.add((i as f64).powf(-s));
    }
    let mf = m as f64;
    let f = mf.powf(-s);
    // Σ_{i≥m} f(i) ≈ ∫_m^∞ f + f(m)/2 − f'(m)/12 + f'''(m)/720
    acc.add(mf * f / (s - 1.0));
    acc.add(f / 2.0);
    acc.add(s * f / mf / 12.0);
    acc.add(-s * (s + 1.0) * (s + 2.0) * f / (mf * mf * mf) / 720.0);
    acc.value()
}

/// Named family of an infinite coupling matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CouplingFamily {
    /// `κ_ij = a_i a_j`.
    ProductSummable { a: PositiveSequence },
    /// `κ_ij = base^{-(i+j)}`.
    GeometricCross { base: f64 },
    /// `κ_ij = κ_j`; `kappa` is stored already normalized when `normalized`.
    Sender {
        kappa: PositiveSequence,
        normalized: bool,
        epsilon: f64,
    },
    /// Dense `n×n` block (row-major), zero outside.
    FiniteEmbedded { n: usize, entries: Vec<f64> },
    /// `κ_ij = strength/n` on `[n]×[n]`, zero outside.
    UniformFinite { n: usize, strength: f64 },
}

/// Infimum of the row sums, with a flag marking families whose infimum over
/// all of ℕ vanishes even though every finite block has positive rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinusNorm {
    pub value: f64,
    pub f3_fails_in_limit: bool,
}

/// Outcome of [`CouplingMatrix::validate_framework`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameworkReport {
    pub f1_holds: bool,
    pub initial_diameter: f64,
    pub f2_holds: bool,
    pub witness: Option<PositiveSequence>,
    pub witness_l1: Option<f64>,
    pub f2_pairs_checked: usize,
    pub f3_holds: bool,
    pub k_minus: f64,
    pub notes: Vec<String>,
}

/// A lazily evaluated infinite nonnegative coupling matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    family: CouplingFamily,
}

impl CouplingMatrix {
    pub fn product_summable(a: PositiveSequence) -> Self {
        Self {
            family: CouplingFamily::ProductSummable { a },
        }
    }

    pub fn geometric_cross(base: f64) -> Result<Self> {
        if !(base.is_finite() && base > 1.0) {
            return Err(Error::invalid("base", format!("must be finite and > 1, got {base}")));
        }
        Ok(Self {
            family: CouplingFamily::GeometricCross { base },
        })
    }

    /// Sender network; with `normalized` the weights are rescaled to unit sum.
    pub fn sender(kappa: PositiveSequence, normalized: bool) -> Self {
        Self::sender_with_epsilon(kappa, normalized, DEFAULT_SENDER_EPSILON)
            .expect("default epsilon is valid")
    }

    pub fn sender_with_epsilon(kappa: PositiveSequence, normalized: bool, epsilon: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        let kappa = if normalized { kappa.normalized() } else { kappa };
        Ok(Self {
            family: CouplingFamily::Sender {
                kappa,
                normalized,
                epsilon,
            },
        })
    }

    pub fn finite_embedded(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "block size must be ≥ 1"));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        if let Some(bad) = entries.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("entries", format!("must be finite and ≥ 0, got {bad}")));
        }
        Ok(Self {
            family: CouplingFamily::FiniteEmbedded { n, entries },
        })
    }

    pub fn uniform_finite(n: usize, strength: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "block size must be ≥ 1"));
        }
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::invalid("strength", format!("must be finite and ≥ 0, got {strength}")));
        }
        Ok(Self {
            family: CouplingFamily::UniformFinite { n, strength },
        })
    }

    pub fn family(&self) -> &CouplingFamily {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            CouplingFamily::ProductSummable { .. } => "product_summable",
            CouplingFamily::GeometricCross { .. } => "geometric_cross",
            CouplingFamily::Sender { .. } => "sender",
            CouplingFamily::FiniteEmbedded { .. } => "finite_embedded",
            CouplingFamily::UniformFinite { .. } => "uniform_finite",
        }
    }

    pub fn is_sender(&self) -> bool {
        matches!(self.family, CouplingFamily::Sender { .. })
    }

    /// Sender weights, if this is a sender network.
    pub fn sender_weights(&self) -> Option<&PositiveSequence> {
        match &self.family {
            CouplingFamily::Sender { kappa, .. } => Some(kappa),
            _ => None,
        }
    }

    pub fn symmetric(&self) -> bool {
        match &self.family {
            CouplingFamily::ProductSummable { .. }
            | CouplingFamily::GeometricCross { .. }
            | CouplingFamily::UniformFinite { .. } => true,
            CouplingFamily::Sender { .. } => false,
            CouplingFamily::FiniteEmbedded { n, entries } => (0..*n)
                .all(|i| (0..i).all(|j| entries[i * n + j] == entries[j * n + i])),
        }
    }

    /// Symmetric with `‖K‖_{1,1} < ∞`: the setting of the gradient-flow results.
    pub fn is_symmetric_summable(&self) -> bool {
        self.symmetric() && self.norm_p_one(1.0).is_finite()
    }

    /// `κ_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i >= 1 && j >= 1, "matrix indices are 1-based");
        match &self.family {
            CouplingFamily::ProductSummable { a } => a.term(i) * a.term(j),
            CouplingFamily::GeometricCross { base } => base.powi(-exponent_i32(i + j)),
            CouplingFamily::Sender { kappa, .. } => kappa.term(j),
            CouplingFamily::FiniteEmbedded { n, entries } => {
                if i <= *n && j <= *n {
                    entries[(i - 1) * n + (j - 1)]
                } else {
                    0.0
                }
            }
            CouplingFamily::UniformFinite { n, strength } => {
                if i <= *n && j <= *n {
                    strength / *n as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// `Σ_j κ_ij`.
    pub fn row_sum(&self, i: usize) -> f64 {
        assert!(i >= 1, "matrix indices are 1-based");
        match &self.family {
            CouplingFamily::ProductSummable { a } => a.term(i) * a.total(),
            CouplingFamily::GeometricCross { base } => {
                base.powi(-exponent_i32(i)) / (base - 1.0)
            }
            CouplingFamily::Sender { kappa, .. } => kappa.total(),
            CouplingFamily::FiniteEmbedded { n, entries } => {
                if i <= *n {
                    neumaier_sum(entries[(i - 1) * n..i * n].iter().copied())
                } else {
                    0.0
                }
            }
            CouplingFamily::UniformFinite { n, strength } => {
                if i <= *n {
                    *strength
                } else {
                    0.0
                }
            }
        }
    }

    /// `‖K‖_{∞,1} = sup_i Σ_j κ_ij`.
    pub fn norm_inf_one(&self) -> f64 {
        match &self.family {
            CouplingFamily::ProductSummable { a } => a.sup() * a.total(),
            CouplingFamily::GeometricCross { .. } => self.row_sum(1),
            CouplingFamily::Sender { kappa, .. } => kappa.total(),
            CouplingFamily::FiniteEmbedded { n, .. } => {
                (1..=*n).map(|i| self.row_sum(i)).fold(0.0, f64::max)
            }
            CouplingFamily::UniformFinite { strength, .. } => *strength,
        }
    }

    /// `‖K‖_{-∞,1} = inf_i Σ_j κ_ij`. Finite families report the infimum
    /// over their block, which is the quantity the finite model uses.
    pub fn norm_minus_inf_one(&self) -> MinusNorm {
        match &self.family {
            CouplingFamily::ProductSummable { a } => MinusNorm {
                value: a.inf() * a.total(),
                f3_fails_in_limit: true,
            },
            CouplingFamily::GeometricCross { .. } => MinusNorm {
                value: 0.0,
                f3_fails_in_limit: true,
            },
            CouplingFamily::Sender { kappa, .. } => MinusNorm {
                value: kappa.total(),
                f3_fails_in_limit: false,
            },
            CouplingFamily::FiniteEmbedded { n, .. } => MinusNorm {
                value: (1..=*n).map(|i| self.row_sum(i)).fold(f64::INFINITY, f64::min),
                f3_fails_in_limit: false,
            },
            CouplingFamily::UniformFinite { strength, .. } => MinusNorm {
                value: *strength,
                f3_fails_in_limit: false,
            },
        }
    }

    /// `‖K‖_{p,1} = ‖(Σ_j κ_ij)_i‖_p`; infinite for sender networks with `p < ∞`.
    pub fn norm_p_one(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "p must be ≥ 1");
        if p.is_infinite() {
            return self.norm_inf_one();
        }
        match &self.family {
            CouplingFamily::ProductSummable { a } => a.total() * a.lp_norm(p),
            CouplingFamily::GeometricCross { base } => {
                (1.0 / (base.powf(p) - 1.0)).powf(1.0 / p) / (base - 1.0)
            }
            CouplingFamily::Sender { .. } => f64::INFINITY,
            CouplingFamily::FiniteEmbedded { n, .. } => lp_of(&self.block_row_sums(*n), p),
            CouplingFamily::UniformFinite { n, strength } => strength * (*n as f64).powf(1.0 / p),
        }
    }

    /// `ε_tail(N) = sup_{i≤N} Σ_{j>N} κ_ij`, the sup-norm bound on the
    /// right-hand-side perturbation caused by dropping indices beyond `N`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        assert!(n >= 1, "truncation must be ≥ 1");
        match &self.family {
            CouplingFamily::ProductSummable { a } => a.sup_prefix(n) * a.tail(n),
            CouplingFamily::GeometricCross { base } => {
                base.powi(-1) * base.powi(-exponent_i32(n)) / (base - 1.0)
            }
            CouplingFamily::Sender { kappa, .. } => kappa.tail(n),
            CouplingFamily::FiniteEmbedded { n: size, entries } => {
                if n >= *size {
                    0.0
                } else {
                    (0..n)
                        .map(|i| neumaier_sum(entries[i * size + n..(i + 1) * size].iter().copied()))
                        .fold(0.0, f64::max)
                }
            }
            CouplingFamily::UniformFinite { n: size, strength } => {
                if n >= *size {
                    0.0
                } else {
                    strength * (size - n) as f64 / *size as f64
                }
            }
        }
    }

    /// The (F2) witness κ̃, or [`Error::Unavailable`] when the family has no
    /// constructive one.
    pub fn tilde_kappa(&self) -> Result<PositiveSequence> {
        match &self.family {
            CouplingFamily::ProductSummable { a } => Ok(a.scaled(1.0 / (a.total() + 1.0))),
            CouplingFamily::Sender { kappa, epsilon, .. } => {
                Ok(kappa.scaled(1.0 / (self.norm_inf_one() + epsilon)))
            }
            _ => Err(Error::Unavailable {
                what: "witness sequence",
                family: self.family_name(),
            }),
        }
    }

    /// The leading `n×n` block, row-major.
    pub fn block(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                out.push(self.entry(i, j));
            }
        }
        out
    }

    /// Row sums of the leading `n×n` block.
    pub fn block_row_sums(&self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| neumaier_sum((1..=n).map(|j| self.entry(i, j))))
            .collect()
    }

    /// `‖K_N‖_{p,1}` of the leading block: the constant that governs the
    /// truncated system (always finite).
    pub fn block_norm_p_one(&self, n: usize, p: f64) -> f64 {
        lp_of(&self.block_row_sums(n), p)
    }

    /// Check frameworks (F1)–(F3) for the given initial data.
    ///
    /// F1 is exact on the truncated configuration. F2 is validated
    /// symbolically through the witness and then sampled on `sample_budget`
    /// index pairs from a deterministic low-discrepancy grid. F3 needs a
    /// strictly positive row-sum infimum that survives the infinite limit.
    pub fn validate_framework(
        &self,
        theta_in: &PhaseState,
        nu: &FrequencyVector,
        sample_budget: usize,
    ) -> FrameworkReport {
        let mut notes = Vec::new();
        let initial_diameter = theta_in.diameter();
        let f1_holds = initial_diameter < std::f64::consts::PI;

        let mut f2_holds = false;
        let mut pairs = 0usize;
        let mut report_witness = None;
        let mut report_l1 = None;
        match self.tilde_kappa() {
            Ok(w) => {
                let l1 = w.total();
                f2_holds = l1 <= 1.0;
                if !f2_holds {
                    notes.push(format!("witness has ℓ¹ norm {l1} > 1"));
                }
                let cap = w.support_len().unwrap_or(SAMPLE_INDEX_CAP).min(SAMPLE_INDEX_CAP);
                let rows = self.row_support().unwrap_or(SAMPLE_INDEX_CAP).min(SAMPLE_INDEX_CAP);
                if w.support_len().is_some() || self.row_support().is_some() {
                    notes.push(format!(
                        "ratio check restricted to the finite support (rows ≤ {rows}, columns ≤ {cap})"
                    ));
                }
                for (i, j) in sample_grid(sample_budget, rows, cap) {
                    pairs += 1;
                    let ratio = self.entry(i, j) / self.row_sum(i);
                    if ratio.partial_cmp(&w.term(j)) != Some(std::cmp::Ordering::Greater) {
                        f2_holds = false;
                        notes.push(format!("ratio check failed at (i, j) = ({i}, {j})"));
                        break;
                    }
                }
                report_witness = Some(w);
                report_l1 = Some(l1);
            }
            Err(_) => notes.push(format!(
                "no constructive witness sequence for the {} family",
                self.family_name()
            )),
        }

        let minus = self.norm_minus_inf_one();
        let f3_holds = minus.value > 0.0 && !minus.f3_fails_in_limit;
        if minus.f3_fails_in_limit {
            notes.push("row-sum infimum vanishes over ℕ".to_string());
        }

        let d_nu = nu.diameter(theta_in.truncation());
        if let Some(l1) = report_l1 {
            let threshold = l1 * minus.value;
            if d_nu > 0.0 {
                notes.push(format!(
                    "frequency diameter {d_nu} vs practical-sync threshold {threshold}"
                ));
            }
        }

        FrameworkReport {
            f1_holds,
            initial_diameter,
            f2_holds,
            witness: report_witness,
            witness_l1: report_l1,
            f2_pairs_checked: pairs,
            f3_holds,
            k_minus: minus.value,
            notes,
        }
    }

    /// Number of rows with nonzero sum, or `None` when infinitely many.
    fn row_support(&self) -> Option<usize> {
        match &self.family {
            CouplingFamily::ProductSummable { a } => a.support_len(),
            CouplingFamily::GeometricCross { .. } | CouplingFamily::Sender { .. } => None,
            CouplingFamily::FiniteEmbedded { n, .. } | CouplingFamily::UniformFinite { n, .. } => Some(*n),
        }
    }
}

fn lp_of(values: &[f64], p: f64) -> f64 {
    crate::ensemble::lp_norm(values, p)
}

/// Deterministic 2-D additive-recurrence (R2) grid over `[1, rows]×[1, cols]`.
fn sample_grid(budget: usize, rows: usize, cols: usize) -> impl Iterator<Item = (usize, usize)> {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    (0..budget).map(move |k| {
        let u = (0.5 + A1 * k as f64).fract();
        let v = (0.5 + A2 * k as f64).fract();
        let i = 1 + ((u * rows as f64) as usize).min(rows - 1);
        let j = 1 + ((v * cols as f64) as usize).min(cols - 1);
        (i, j)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap2() -> CouplingMatrix {
        CouplingMatrix::finite_embedded(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn brute(f: impl Fn(usize) -> f64, n: usize) -> f64 {
        (1..=n).map(f).sum()
    }

    #[test]
    fn entries_follow_family_formulas() {
        let gc = CouplingMatrix::geometric_cross(3.0).unwrap();
        assert!((gc.entry(1, 1) - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(swap2().entry(3, 1), 0.0);
        let ps = CouplingMatrix::product_summable(PositiveSequence::dyadic());
        assert_eq!(ps.entry(2, 3), 0.03125);
    }

    #[test]
    fn row_sums_match_brute_force() {
        let gc = CouplingMatrix::geometric_cross(3.0).unwrap();
        let oracle = brute(|j| 3f64.powi(-(1 + j as i32)), 60);
        assert!((gc.row_sum(1) - oracle).abs() < 1e-15);
        assert!((gc.row_sum(1) - 1.0 / 6.0).abs() < 1e-16);
        let sender = CouplingMatrix::sender(PositiveSequence::dyadic(), true);
        for i in [1, 7, 1000] {
            assert!((sender.row_sum(i) - 1.0).abs() < 1e-15);
        }
        let uf = CouplingMatrix::uniform_finite(4, 2.0).unwrap();
        assert_eq!(uf.row_sum(2), 2.0);
        assert_eq!(uf.row_sum(5), 0.0);
    }

    #[test]
    fn sup_and_inf_norms() {
        let gc = CouplingMatrix::geometric_cross(3.0).unwrap();
        assert!((gc.norm_inf_one() - 1.0 / 6.0).abs() < 1e-16);
        let sender = CouplingMatrix::sender(PositiveSequence::dyadic(), true);
        assert!((sender.norm_inf_one() - 1.0).abs() < 1e-15);
        assert_eq!(swap2().norm_inf_one(), 1.0);

        let minus = sender.norm_minus_inf_one();
        assert!((minus.value - 1.0).abs() < 1e-15 && !minus.f3_fails_in_limit);
        for i in [1, 3, 40] {
            assert!((sender.row_sum(i) - minus.value).abs() < 1e-15);
        }
        let ps = CouplingMatrix::product_summable(PositiveSequence::dyadic()).norm_minus_inf_one();
        assert_eq!(ps.value, 0.0);
        assert!(ps.f3_fails_in_limit);
        let uf = CouplingMatrix::uniform_finite(4, 2.0).unwrap().norm_minus_inf_one();
        assert_eq!(uf.value, 2.0);
    }

    #[test]
    fn p_one_norms() {
        let gc = CouplingMatrix::geometric_cross(3.0).unwrap();
        let oracle = brute(|i| 1.0 / (2.0 * 3f64.powi(i as i32)), 60);
        assert!((gc.norm_p_one(1.0) - oracle).abs() < 1e-15);
        assert!((gc.norm_p_one(1.0) - 0.25).abs() < 1e-15);
        assert_eq!(gc.norm_p_one(f64::INFINITY), gc.norm_inf_one());
        assert!((swap2().norm_p_one(2.0) - 2f64.sqrt()).abs() < 1e-15);
        let sender = CouplingMatrix::sender(PositiveSequence::dyadic(), true);
        assert!(sender.norm_p_one(2.0).is_infinite());
    }

    #[test]
    fn tail_bounds() {
        let gc = CouplingMatrix::geometric_cross(3.0).unwrap();
        let oracle = brute(|j| 3f64.powi(-(1 + (10 + j) as i32)), 60);
        assert!((gc.tail_bound(10) - oracle).abs() < 1e-20);
        assert!((gc.tail_bound(10) - 2.823e-6).abs() < 1e-9);
        let sender = CouplingMatrix::sender(PositiveSequence::dyadic(), false);
        assert!((sender.tail_bound(20) - 2f64.powi(-20)).abs() < 1e-22);
        assert_eq!(swap2().tail_bound(2), 0.0);
        let cut = CouplingMatrix::finite_embedded(3, vec![0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 2.0, 3.0, 0.0]).unwrap();
        assert_eq!(cut.tail_bound(2), 3.0);
    }

    #[test]
    fn witness_sequences() {
        let ps = CouplingMatrix::product_summable(PositiveSequence::dyadic());
        let w = ps.tilde_kappa().unwrap();
        for j in 1..20 {
            assert!((w.term(j) - 2f64.powi(-(j as i32)) / 2.0).abs() < 1e-18);
        }
        let sender = CouplingMatrix::sender(PositiveSequence::dyadic(), true);
        let w = sender.tilde_kappa().unwrap();
        let eps = DEFAULT_SENDER_EPSILON;
        assert!((w.term(3) - 0.125 / (1.0 + eps)).abs() < 1e-18);
        assert!(matches!(
            CouplingMatrix::geometric_cross(3.0).unwrap().tilde_kappa(),
            Err(Error::Unavailable { .. })
        ));
    }

    #[test]
    fn power_law_totals() {
        // ζ(2) = π²/6, ζ(3) = Apéry's constant
        let s2 = PositiveSequence::power_law(2.0, 1.0).unwrap();
        assert!((s2.total() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        let s3 = PositiveSequence::power_law(3.0, 1.0).unwrap();
        assert!((s3.total() - 1.202_056_903_159_594_3).abs() < 1e-14);
        let direct: f64 = (1..=10).map(|i| (i as f64).powi(-2)).sum();
        assert!((s2.tail(10) - (s2.total() - direct)).abs() < 1e-14);
        assert!(s2.tail(1000) < s2.tail(999));
        assert!((s2.lp_norm(2.0) - (std::f64::consts::PI.powi(4) / 90.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn framework_validation() {
        use crate::ensemble::{FrequencyVector, PhaseState};
        use std::f64::consts::{FRAC_PI_4, PI};
        let ps = CouplingMatrix::product_summable(PositiveSequence::dyadic());
        let alt = PhaseState::new((1..=20).map(|i| if i % 2 == 0 { FRAC_PI_4 } else { -FRAC_PI_4 }).collect()).unwrap();
        let report = ps.validate_framework(&alt, &FrequencyVector::Homogeneous(0.0), 500);
        assert!(report.f1_holds && report.f2_holds && !report.f3_holds);
        assert!((report.initial_diameter - PI / 2.0).abs() < 1e-15);

        let sender = CouplingMatrix::sender(PositiveSequence::dyadic(), true);
        let report = sender.validate_framework(&alt, &FrequencyVector::Homogeneous(0.0), 500);
        assert!(report.f3_holds && (report.k_minus - 1.0).abs() < 1e-15);

        let wide = PhaseState::new(vec![0.0, PI]).unwrap();
        assert!(!ps.validate_framework(&wide, &FrequencyVector::Homogeneous(0.0), 10).f1_holds);

        let gc = CouplingMatrix::geometric_cross(3.0).unwrap();
        let report = gc.validate_framework(&alt, &FrequencyVector::Homogeneous(0.0), 10);
        assert!(!report.f2_holds && report.witness.is_none());
    }

    #[test]
    fn renormalized_sender_prefix_has_no_tail() {
        let kappa = PositiveSequence::dyadic().renormalized_prefix(24).unwrap();
        let sender = CouplingMatrix::sender(kappa, true);
        assert_eq!(sender.tail_bound(24), 0.0);
        assert!((sender.norm_inf_one() - 1.0).abs() < 1e-15);
    }
}
