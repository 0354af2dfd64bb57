//! Compensated (Neumaier) summation.
//!
//! Every reduction in the crate goes through [`NeumaierSum`] in ascending
//! index order, which makes results bit-reproducible regardless of how the
//! outer loops are scheduled.

use std::iter::Sum;

/// Running Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        acc.extend(iter);
        acc
    }
}

/// Compensated sum of an iterator, accumulated in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().sum::<NeumaierSum>().value()
}

/// Compensated dot product `Σ a_k b_k`.
pub fn neumaier_dot(a: &[f64], b: &[f64]) -> f64 {
    neumaier_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        // Naive summation returns 0 here.
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(values), 2.0);
        assert_eq!(values.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn harmonic_tail_matches_reverse_order() {
        let forward = neumaier_sum((1..=100_000).map(|k| 1.0 / k as f64));
        let mut exact = 0.0;
        for k in (1..=100_000).rev() {
            exact += 1.0 / k as f64;
        }
        assert!((forward - exact).abs() < 1e-13);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(neumaier_sum(std::iter::empty()), 0.0);
        assert_eq!(neumaier_dot(&[], &[]), 0.0);
    }
}
