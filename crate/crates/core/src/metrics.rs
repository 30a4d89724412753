//! Scaled-MSE, coverage/width aggregation and normality diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{complement, ThinQr};
use crate::model::{Method, ReplicationRecord};
use crate::stats::{kolmogorov_critical, kolmogorov_sf, mean, normal_cdf, std_dev};

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMseRecord {
    pub idx_set: Vec<usize>,
    pub value: f64,
    pub method: Method,
}

/// Scaled-MSE of `θ̂_I`:
///
/// ```text
/// (θ̂_I − θ*_I)ᵀ [(S_n⁻¹)_II]⁻¹ (θ̂_I − θ*_I),
/// [(S_n⁻¹)_II]⁻¹ = X_Iᵀ (I − P_{X_{I^c}}) X_I.
/// ```
///
/// Evaluated as `‖(I − P_{X_{I^c}}) X_I e‖²` with `e = θ̂_I − θ*_I`, so
/// `S_n` is never inverted.
pub fn scaled_mse(
    theta_hat_i: &[f64],
    theta_star_i: &[f64],
    x: &DMatrix<f64>,
    idx: &[usize],
) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::InvalidInput(
            "scaled-MSE needs a nonempty index set".into(),
        ));
    }
    if theta_hat_i.len() != idx.len() || theta_star_i.len() != idx.len() {
        return Err(Error::InvalidInput(format!(
            "index set has {} entries but estimates have lengths {} and {}",
            idx.len(),
            theta_hat_i.len(),
            theta_star_i.len()
        )));
    }
    let d = x.ncols();
    if let Some(&j) = idx.iter().find(|&&j| j >= d) {
        return Err(Error::InvalidInput(format!(
            "index {j} out of range for d = {d}"
        )));
    }
    // full-rank check on X as a whole
    ThinQr::new(x)?;
    let err = DVector::from_iterator(
        idx.len(),
        theta_hat_i.iter().zip(theta_star_i).map(|(a, b)| a - b),
    );
    let xi_e = x.select_columns(idx) * err;
    let rest = complement(d, idx);
    let resid = if rest.is_empty() {
        xi_e
    } else {
        ThinQr::new(&x.select_columns(&rest))?.residualize(&xi_e)
    };
    Ok(resid.norm_squared())
}

/// Per-coordinate scaled-MSE weights `x_jᵀ (I − P_{X_{−j}}) x_j` for each
/// `j` in `coords`, from a single factorization of `X`. The single-coordinate
/// scaled-MSE of `θ̂_j` is `(θ̂_j − θ*_j)²` times this weight.
pub fn coordinate_weights(x: &DMatrix<f64>, coords: &[usize]) -> Result<Vec<f64>> {
    let d = x.ncols();
    if let Some(&j) = coords.iter().find(|&&j| j >= d) {
        return Err(Error::InvalidInput(format!(
            "index {j} out of range for d = {d}"
        )));
    }
    let inv = ThinQr::new(x)?.gram_inverse();
    Ok(coords.iter().map(|&j| 1.0 / inv[(j, j)]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub alpha: f64,
    pub nominal: f64,
    pub empirical: f64,
    /// `√(p(1−p)/n_reps)` at the empirical proportion.
    pub empirical_se: f64,
    pub mean_width: f64,
    pub sd_width: f64,
    pub n_reps: usize,
}

/// Fraction of replications whose interval for `coord` under `method`
/// contains the truth, together with width statistics.
pub fn coverage_and_width(
    records: &[ReplicationRecord],
    method: Method,
    coord: usize,
    alpha: f64,
) -> Result<CoverageSummary> {
    let mut hits = 0usize;
    let mut widths = Vec::with_capacity(records.len());
    for rec in records {
        let c = rec.coord(method, coord).ok_or_else(|| {
            Error::InvalidInput(format!(
                "replication {} has no {method} result for coordinate {coord}",
                rec.rep_index
            ))
        })?;
        let iv = c.interval(alpha).ok_or(Error::MissingAlpha(alpha))?;
        if iv.contains(c.truth) {
            hits += 1;
        }
        widths.push(iv.width());
    }
    let n_reps = records.len();
    if n_reps == 0 {
        return Err(Error::InvalidInput("no replications to aggregate".into()));
    }
    let p = hits as f64 / n_reps as f64;
    // infinite widths make the mean infinite, which is the honest answer
    let finite = widths.iter().all(|w| w.is_finite());
    Ok(CoverageSummary {
        alpha,
        nominal: 1.0 - alpha,
        empirical: p,
        empirical_se: (p * (1.0 - p) / n_reps as f64).sqrt(),
        mean_width: if finite { mean(&widths) } else { f64::INFINITY },
        sd_width: if finite { std_dev(&widths) } else { f64::NAN },
        n_reps,
    })
}

/// One-sample Kolmogorov–Smirnov test against `N(0, 1)` with the
/// asymptotic Kolmogorov null distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub distance: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsTest {
    /// True when the test does not reject at `level`.
    pub fn passes(&self, level: f64) -> bool {
        self.distance < ks_critical_distance(self.n, level)
    }
}

/// Critical value of the KS distance for a sample of size `n`.
pub fn ks_critical_distance(n: usize, level: f64) -> f64 {
    kolmogorov_critical(level) / (n as f64).sqrt()
}

pub fn ks_test_normal(values: &[f64]) -> KsTest {
    let n = values.len();
    if n == 0 {
        return KsTest {
            distance: f64::NAN,
            p_value: f64::NAN,
            n,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let distance = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / nf)
                .abs()
                .max(((i + 1) as f64 / nf - f).abs())
        })
        .fold(0.0_f64, f64::max);
    KsTest {
        distance,
        p_value: kolmogorov_sf(nf.sqrt() * distance),
        n,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedErrors {
    pub values: Vec<f64>,
    pub ks: KsTest,
}

/// `(θ̂ − θ*) / stderr` for every replication carrying a standard error,
/// plus a KS test of those values against the standard normal.
pub fn standardized_errors(
    records: &[ReplicationRecord],
    method: Method,
    coord: usize,
) -> StandardizedErrors {
    let values: Vec<f64> = records
        .iter()
        .filter_map(|r| r.coord(method, coord)?.pivot())
        .collect();
    let ks = ks_test_normal(&values);
    StandardizedErrors { values, ks }
}

/// Equal-width histogram over `[lo, hi)`; the last bin is closed. Values
/// outside the range are tallied separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_RANGE: (f64, f64) = (-5.0, 5.0);

pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Histogram {
    assert!(bins > 0 && hi > lo, "histogram needs bins > 0 and hi > lo");
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let mut counts = vec![0; bins];
    let (mut below, mut above) = (0, 0);
    for &v in values {
        if v < lo {
            below += 1;
        } else if v > hi {
            above += 1;
        } else {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    Histogram {
        edges,
        counts,
        below,
        above,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoordOutcome, Interval, MethodOutcome};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn record(rep: usize, truth: f64, est: f64, se: f64, iv: (f64, f64)) -> ReplicationRecord {
        ReplicationRecord {
            k: 1,
            rep_index: rep,
            outcomes: vec![MethodOutcome {
                method: Method::Tale,
                coords: vec![CoordOutcome {
                    coord: 0,
                    truth,
                    estimate: est,
                    stderr: Some(se),
                    intervals: vec![Interval {
                        alpha: 0.1,
                        lower: iv.0,
                        upper: iv.1,
                    }],
                    scaled_mse: None,
                }],
                sigma_hat: 1.0,
                runtime_ms: None,
            }],
        }
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn zero_error_zero_mse() {
        let x = random_matrix(10, 3, 1);
        assert_eq!(
            scaled_mse(&[1.0, 2.0], &[1.0, 2.0], &x, &[0, 2]).unwrap(),
            0.0
        );
    }

    #[test]
    fn full_index_set_is_plain_quadratic_form() {
        let x = random_matrix(12, 3, 2);
        let e = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        let want = e.dot(&(x.transpose() * &x * &e));
        let got = scaled_mse(&[1.3, 0.8, 0.5], &[1.0, 1.0, 0.0], &x, &[0, 1, 2]).unwrap();
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn scaled_mse_argument_checks() {
        let x = random_matrix(10, 3, 3);
        assert!(scaled_mse(&[], &[], &x, &[]).is_err());
        assert!(scaled_mse(&[1.0], &[1.0, 2.0], &x, &[0]).is_err());
        assert!(scaled_mse(&[1.0], &[1.0], &x, &[5]).is_err());
    }

    #[test]
    fn infinite_intervals_always_cover() {
        let recs: Vec<_> = (0..10)
            .map(|r| record(r, 0.0, 0.5, 1.0, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        let s = coverage_and_width(&recs, Method::Tale, 0, 0.1).unwrap();
        assert_eq!(s.empirical, 1.0);
        assert_eq!(s.empirical_se, 0.0);
        assert!((s.nominal - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_width_off_target_never_covers() {
        let recs: Vec<_> = (0..10)
            .map(|r| record(r, 0.0, 0.5, 1.0, (0.5, 0.5)))
            .collect();
        let s = coverage_and_width(&recs, Method::Tale, 0, 0.1).unwrap();
        assert_eq!(s.empirical, 0.0);
        assert_eq!(s.mean_width, 0.0);
    }

    #[test]
    fn missing_level_is_an_error() {
        let recs = vec![record(0, 0.0, 0.0, 1.0, (-1.0, 1.0))];
        assert!(matches!(
            coverage_and_width(&recs, Method::Tale, 0, 0.05),
            Err(Error::MissingAlpha(_))
        ));
        assert!(coverage_and_width(&recs, Method::Ols, 0, 0.1).is_err());
        assert!(coverage_and_width(&[], Method::Tale, 0, 0.1).is_err());
    }

    #[test]
    fn exact_pivot_coverage_matches_binomial_band() {
        // θ̂ ~ N(θ*, 1) with the exact standard error: 90% intervals
        let n_reps = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let z = crate::stats::z_two_sided(0.1);
        let recs: Vec<_> = (0..n_reps)
            .map(|r| {
                let est: f64 = rng.sample(StandardNormal);
                record(r, 0.0, est, 1.0, (est - z, est + z))
            })
            .collect();
        let s = coverage_and_width(&recs, Method::Tale, 0, 0.1).unwrap();
        let band = 3.0 * (0.09 / n_reps as f64).sqrt();
        assert!((s.empirical - 0.9).abs() < band, "{}", s.empirical);
    }

    #[test]
    fn point_mass_ks_distance() {
        let recs: Vec<_> = (0..20)
            .map(|r| record(r, 1.0, 1.0, 0.3, (0.0, 2.0)))
            .collect();
        let se = standardized_errors(&recs, Method::Tale, 0);
        assert!(se.values.iter().all(|&v| v == 0.0));
        assert!((se.ks.distance - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_null_rejection_rate() {
        // under the null, 1000-sample KS statistics stay below the 1%
        // critical value in about 99% of meta-replications
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let crit = ks_critical_distance(1000, 0.01);
        assert!((crit - 1.6276 / 1000f64.sqrt()).abs() < 1e-4);
        let meta = 300;
        let passes = (0..meta)
            .filter(|_| {
                let v: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
                ks_test_normal(&v).distance < crit
            })
            .count();
        assert!(passes as f64 / meta as f64 >= 0.98, "{passes}");
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let v: Vec<f64> = (0..1000)
            .map(|_| rng.sample::<f64, _>(StandardNormal) - 0.3)
            .collect();
        let t = ks_test_normal(&v);
        assert!(!t.passes(0.01));
        assert!(t.p_value < 0.01);
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[-6.0, -5.0, -0.1, 0.0, 4.99, 5.0, 7.0], 50, -5.0, 5.0);
        assert_eq!(h.edges.len(), 51);
        assert_eq!(h.below, 1);
        assert_eq!(h.above, 1);
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[24], 1);
        assert_eq!(h.counts[25], 1);
        assert_eq!(h.counts[49], 2);
    }

    #[test]
    fn coordinate_weights_match_projection_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = coordinate_weights(&x, &[0, 3]).unwrap();
        for (pos, j) in [0usize, 3].into_iter().enumerate() {
            let direct = scaled_mse(&[1.5], &[0.5], &x, &[j]).unwrap();
            assert!((direct - w[pos]).abs() <= 1e-10 * direct.max(1.0));
        }
        assert!(coordinate_weights(&x, &[4]).is_err());
    }
}
