//! Small statistical helpers: normal quantiles, the Kolmogorov limiting
//! distribution, compensated sums and empirical quantiles.

use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Two-sided critical value `z_{1−α/2}`.
pub fn z_two_sided(alpha: f64) -> f64 {
    std_normal().inverse_cdf(1.0 - alpha / 2.0)
}

/// Neumaier-compensated sum; result does not depend on summation order
/// beyond rounding of the compensation term.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    stable_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (denominator `n − 1`); zero for a single value.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return 0.0;
    }
    let m = mean(values);
    let ss = stable_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (n - 1) as f64).sqrt()
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > x) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² x²)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        // the alternating series converges too slowly here; use the
        // theta-function form of the CDF instead
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let c = (2.0 * std::f64::consts::PI).sqrt() / x;
        let cdf: f64 = (1..=20)
            .map(|j| {
                let m = (2 * j - 1) as f64;
                (-m * m * pi2 / (8.0 * x * x)).exp()
            })
            .sum::<f64>()
            * c;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut total = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        total += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Upper `level` quantile of the Kolmogorov distribution: the `x` with
/// `P(K > x) = level`.
pub fn kolmogorov_critical(level: f64) -> f64 {
    let (mut lo, mut hi) = (0.05_f64, 5.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Empirical quantile (inverse of the empirical CDF): the smallest sample
/// value `v` such that at least a fraction `q` of the sample is `≤ v`.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let pos = (q * m as f64).ceil() as usize;
    sorted[pos.clamp(1, m) - 1]
}
