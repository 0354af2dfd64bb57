//! Truncated phase configurations and natural frequencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::{neumaier_sum, NeumaierSum};
use crate::topology::PositiveSequence;

/// How oscillators beyond the truncation enter the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// Indices beyond `N` are removed from every sum. The dropped influence
    /// is certified by [`crate::topology::CouplingMatrix::tail_bound`].
    #[default]
    Dropped,
    /// Indices beyond `N` are held at one constant phase. Exploratory only:
    /// no error certificate exists for this mode.
    Frozen { tail_phase: f64 },
}

/// Unwrapped phases `θ_1..θ_N` at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    phases: Vec<f64>,
    time: f64,
    tail_model: TailModel,
}

fn check_finite(name: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::invalid(name, format!("entry {} is not finite", k + 1))),
        None => Ok(()),
    }
}

impl PhaseState {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        Self::with_tail(phases, 0.0, TailModel::Dropped)
    }

    pub fn with_tail(phases: Vec<f64>, time: f64, tail_model: TailModel) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("phases", "need at least one oscillator"));
        }
        check_finite("phases", &phases)?;
        if !time.is_finite() {
            return Err(Error::invalid("time", "must be finite"));
        }
        if let TailModel::Frozen { tail_phase } = tail_model {
            if !tail_phase.is_finite() {
                return Err(Error::invalid("tail_phase", "must be finite"));
            }
        }
        Ok(Self {
            phases,
            time,
            tail_model,
        })
    }

    /// Same tail model, new phases and time. Used by the integrator, whose
    /// outputs are finite by construction of the step bound.
    pub(crate) fn advanced(&self, phases: Vec<f64>, time: f64) -> Self {
        Self {
            phases,
            time,
            tail_model: self.tail_model,
        }
    }

    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn into_phases(self) -> Vec<f64> {
        self.phases
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn truncation(&self) -> usize {
        self.phases.len()
    }

    pub fn tail_model(&self) -> TailModel {
        self.tail_model
    }

    pub fn diameter(&self) -> f64 {
        diameter(self)
    }

    pub fn extremals(&self) -> (f64, f64) {
        extremals(self)
    }
}

/// Natural frequencies `ν_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum FrequencyVector {
    Homogeneous(f64),
    PerIndex(Vec<f64>),
}

impl Default for FrequencyVector {
    fn default() -> Self {
        FrequencyVector::Homogeneous(0.0)
    }
}

impl FrequencyVector {
    pub fn per_index(values: Vec<f64>) -> Result<Self> {
        check_finite("frequencies", &values)?;
        Ok(FrequencyVector::PerIndex(values))
    }

    /// `ν_i` for a 0-based storage index.
    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        match self {
            FrequencyVector::Homogeneous(nu) => *nu,
            FrequencyVector::PerIndex(v) => v[k],
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        match self {
            FrequencyVector::Homogeneous(_) => true,
            FrequencyVector::PerIndex(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        match self {
            FrequencyVector::PerIndex(v) if v.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            }),
            _ => Ok(()),
        }
    }

    /// The first `n` frequencies as a dense vector.
    pub fn to_vec(&self, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.at(k)).collect()
    }

    /// `‖𝒱‖_∞` over the first `n` entries.
    pub fn sup_norm(&self, n: usize) -> f64 {
        match self {
            FrequencyVector::Homogeneous(nu) => nu.abs(),
            FrequencyVector::PerIndex(v) => v.iter().take(n).fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// `D(𝒱)` over the first `n` entries; zero for the homogeneous kind.
    pub fn diameter(&self, n: usize) -> f64 {
        match self {
            FrequencyVector::Homogeneous(_) => 0.0,
            FrequencyVector::PerIndex(v) => diameter_of(&v[..n.min(v.len())]),
        }
    }
}

/// `ω_1..ω_N` of the second-order sender system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyState {
    pub omegas: Vec<f64>,
    pub time: f64,
}

impl FrequencyState {
    pub fn new(omegas: Vec<f64>, time: f64) -> Result<Self> {
        check_finite("omegas", &omegas)?;
        Ok(Self { omegas, time })
    }

    pub fn diameter(&self) -> f64 {
        diameter_of(&self.omegas)
    }
}

/// `(min, max)` of a nonempty slice.
pub fn extremals_of(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// `max − min` of a slice; zero when empty.
pub fn diameter_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (lo, hi) = extremals_of(values);
    hi - lo
}

/// Componentwise `(inf, sup)`, counting a frozen tail phase as one more sample.
pub fn extremals(theta: &PhaseState) -> (f64, f64) {
    let (lo, hi) = extremals_of(&theta.phases);
    match theta.tail_model {
        TailModel::Dropped => (lo, hi),
        TailModel::Frozen { tail_phase } => (lo.min(tail_phase), hi.max(tail_phase)),
    }
}

/// `D(Θ) = sup − inf` over the truncated indices.
pub fn diameter(theta: &PhaseState) -> f64 {
    let (lo, hi) = extremals(theta);
    hi - lo
}

/// Standard ℓ^p norm; `p = ∞` gives `max |x_i|`.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    assert!(p >= 1.0, "p must be ≥ 1");
    let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || sup == 0.0 || !sup.is_finite() {
        return sup;
    }
    if p == 1.0 {
        return neumaier_sum(x.iter().map(|v| v.abs()));
    }
    // Scale by the largest entry so that large p cannot overflow.
    let s = neumaier_sum(x.iter().map(|v| (v.abs() / sup).powf(p)));
    sup * s.powf(1.0 / p)
}

/// `𝒮 = Σ_{k≤N} κ_k θ_k`, compensated, in ascending index order.
pub fn weighted_sum(theta: &PhaseState, kappa: &PositiveSequence) -> f64 {
    let mut acc = NeumaierSum::new();
    for (k, &th) in theta.phases.iter().enumerate() {
        acc.add(kappa.term(k + 1) * th);
    }
    acc.value()
}

/// `θ̂_i = θ_i − ν t`.
pub fn gauge_shift(theta: &PhaseState, nu: f64, t: f64) -> PhaseState {
    let shift = nu * t;
    let phases = theta.phases.iter().map(|th| th - shift).collect();
    let tail_model = match theta.tail_model {
        TailModel::Frozen { tail_phase } => TailModel::Frozen {
            tail_phase: tail_phase - shift,
        },
        TailModel::Dropped => TailModel::Dropped,
    };
    PhaseState {
        phases,
        time: theta.time,
        tail_model,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn state(v: &[f64]) -> PhaseState {
        PhaseState::new(v.to_vec()).unwrap()
    }

    fn alternating(n: usize) -> PhaseState {
        state(&(1..=n).map(|i| if i % 2 == 0 { FRAC_PI_3 } else { -FRAC_PI_3 }).collect::<Vec<_>>())
    }

    #[test]
    fn rejects_bad_states() {
        assert!(PhaseState::new(vec![]).is_err());
        assert!(PhaseState::new(vec![0.0, f64::NAN]).is_err());
        assert!(FrequencyVector::per_index(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn diameters() {
        for n in [2, 3, 20] {
            assert!((alternating(n).diameter() - 2.0 * PI / 3.0).abs() < 1e-15);
        }
        assert_eq!(state(&[0.4; 5]).diameter(), 0.0);
        assert_eq!(state(&[0.0, FRAC_PI_2, FRAC_PI_4]).diameter(), FRAC_PI_2);
        let frozen = PhaseState::with_tail(vec![0.0, 0.1], 0.0, TailModel::Frozen { tail_phase: 1.0 }).unwrap();
        assert_eq!(frozen.diameter(), 1.0);
    }

    #[test]
    fn extremal_values() {
        assert_eq!(state(&[0.1, -0.2, 0.3]).extremals(), (-0.2, 0.3));
        assert_eq!(state(&[0.7]).extremals(), (0.7, 0.7));
        assert_eq!(alternating(4).extremals(), (-FRAC_PI_3, FRAC_PI_3));
    }

    #[test]
    fn norms() {
        assert_eq!(lp_norm(&[3.0, 4.0], 2.0), 5.0);
        assert_eq!(lp_norm(&[1.0, -1.0, 1.0], f64::INFINITY), 1.0);
        assert_eq!(lp_norm(&[1.0; 4], 1.0), 4.0);
        assert_eq!(lp_norm(&[0.0; 3], 2.0), 0.0);
    }

    #[test]
    fn weighted_sums() {
        let half = PositiveSequence::explicit(vec![0.5, 0.5]).unwrap();
        assert_eq!(weighted_sum(&state(&[0.0, PI]), &half), FRAC_PI_2);
        assert_eq!(weighted_sum(&state(&[0.0, 0.0]), &half), 0.0);
        let quarter = PositiveSequence::explicit(vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(weighted_sum(&state(&[PI; 3]), &quarter), PI);
    }

    #[test]
    fn gauge_shifts() {
        let th = state(&[1.0, 2.0]);
        assert_eq!(gauge_shift(&th, 0.0, 3.0), th);
        let shifted = gauge_shift(&th, 1.0, 1.0);
        assert_eq!(shifted.phases(), &[0.0, 1.0]);
        assert_eq!(shifted.diameter(), 1.0);
        let shifted = gauge_shift(&state(&[0.0, FRAC_PI_2]), 2.0, 0.5);
        assert_eq!(shifted.phases(), &[-1.0, FRAC_PI_2 - 1.0]);
    }

    #[test]
    fn frequency_vectors() {
        let nu = FrequencyVector::per_index(vec![0.3, -0.1, 0.2]).unwrap();
        assert!((nu.diameter(3) - 0.4).abs() < 1e-16);
        assert_eq!(nu.sup_norm(3), 0.3);
        assert!(nu.check_len(4).is_err());
        assert_eq!(FrequencyVector::Homogeneous(2.0).diameter(10), 0.0);
    }
}
