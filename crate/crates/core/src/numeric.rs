//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation with a fixed split order.
///
/// The result is independent of how callers chunk their work and carries an
/// `O(log n)` rounding bound instead of the `O(n)` bound of a running sum.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// `ceil(x)` that ignores representation noise, so `0.95 * 1000.0`
/// and `(1.0 - 0.7) * 10.0` land on 950 and 3.
pub fn robust_ceil(x: f64) -> f64 {
    let slack = 1e-9 * x.abs().max(1.0);
    (x - slack).ceil()
}

/// Standard normal inverse CDF.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Round to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let shift = digits - 1 - magnitude;
    if shift >= 0 {
        let scale = 10f64.powi(shift);
        (x * scale).round() / scale
    } else {
        let scale = 10f64.powi(-shift);
        (x / scale).round() * scale
    }
}

/// Round to a fixed number of decimal places.
pub fn round_decimals(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (x * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn robust_ceil_absorbs_noise() {
        assert_eq!(robust_ceil(0.95 * 1000.0), 950.0);
        assert_eq!(robust_ceil((1.0 - 0.7) * 10.0), 3.0);
        assert_eq!(robust_ceil(0.2), 1.0);
        assert_eq!(robust_ceil(3.5), 4.0);
    }

    #[test]
    fn normal_quantile_reference_points() {
        assert!((normal_quantile(0.05) + 1.6448536269514722).abs() < 1e-9);
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn significant_rounding() {
        assert_eq!(round_significant(0.93333333, 6), 0.933333);
        assert_eq!(round_significant(700.00049, 6), 700.0);
        assert_eq!(round_significant(123456789.0, 6), 123457000.0);
        assert_eq!(round_significant(-0.000123456789, 3), -0.000123);
    }
}
