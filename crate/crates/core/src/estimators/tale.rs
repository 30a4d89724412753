//! Two-stage adaptive linear estimating equation (TALE) for a single
//! adaptive coordinate.
//!
//! Stage one fits OLS on the full design and keeps the non-adaptive
//! coefficients as a prior. Stage two solves the weighted estimating
//! equation
//!
//! ```text
//! Σ_i w_i (y_i − x_i^ad θ − x_i^nadᵀ θ_nad^prior) = 0
//! ```
//!
//! for the scalar `θ`. The weights are predictable,
//!
//! ```text
//! w_i = f(s_i / s0) x_i^ad / √s0,   s_i = s0 + Σ_{t≤i} (x_t^ad)²,
//! f(x) = 1 / √(x · log(e²x) · (log log(e²x))²),
//! ```
//!
//! and `Σ w_i² ≤ ∫_1^∞ f² = 1/log 2` for every input. The pivot
//! `(Σ w_i x_i^ad)(θ̂ − θ*) / (σ̂ √Σ w_i²)` is asymptotically standard normal.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::solve_least_squares;
use crate::model::{AdaptiveDataset, EstimateReport, Interval, IntervalSet, Method};
use crate::stats::{stable_sum, z_two_sided};

use super::{check_alphas, SigmaHat};

/// Smallest `s0` the default schedule will hand out.
const MIN_DEFAULT_S0: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct TaleConfig {
    pub s0: f64,
    pub sigma_hat: SigmaHat,
    pub alpha_levels: Vec<f64>,
}

impl TaleConfig {
    /// `s0 = log log n` (clamped), the usual schedule origin.
    pub fn for_sample_size(n: usize, sigma_hat: SigmaHat, alpha_levels: Vec<f64>) -> Self {
        Self {
            s0: default_s0(n),
            sigma_hat,
            alpha_levels,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "s0 must be positive and finite, got {}",
                self.s0
            )));
        }
        check_alphas(&self.alpha_levels)
    }
}

/// `max(log log n, 0.01)`; `log log n` is negative or undefined for `n < 3`.
pub fn default_s0(n: usize) -> f64 {
    let v = (n as f64).ln().ln();
    if v.is_finite() {
        v.max(MIN_DEFAULT_S0)
    } else {
        MIN_DEFAULT_S0
    }
}

/// The weight profile `f(x) = 1/√(x log(e²x) (log log(e²x))²)` on `[1, ∞)`.
pub fn f_weight(x: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::Domain(format!("f_weight needs x >= 1, got {x}")));
    }
    // log(e² x) = 2 + log x
    let l = 2.0 + x.ln();
    Ok(1.0 / ((x * l).sqrt() * l.ln()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaleWeights {
    pub w: Vec<f64>,
    /// Running `s_i`, including the current observation.
    pub s: Vec<f64>,
}

pub fn tale_weights(x_ad: &[f64], s0: f64) -> Result<TaleWeights> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "s0 must be positive and finite, got {s0}"
        )));
    }
    let sqrt_s0 = s0.sqrt();
    let mut running = s0;
    let mut w = Vec::with_capacity(x_ad.len());
    let mut s = Vec::with_capacity(x_ad.len());
    for &xi in x_ad {
        running += xi * xi;
        s.push(running);
        w.push(f_weight(running / s0)? * xi / sqrt_s0);
    }
    Ok(TaleWeights { w, s })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaleDiagnostics {
    /// `Σ w_i ê_i` with `ê` the OLS residuals (proxy for the martingale
    /// term). Absent when no OLS fit was needed.
    pub noise_proxy: Option<f64>,
    /// `Σ w_i x_i^nadᵀ (θ̂_OLS − prior)` over the non-adaptive block (proxy
    /// for the prior-induced bias term; zero when the prior is OLS).
    pub prior_bias_proxy: Option<f64>,
    pub max_abs_weight: f64,
    /// `s_n / s0`.
    pub s_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaleResult {
    /// 0-based index of the adaptive coordinate.
    pub target: usize,
    pub theta_hat: f64,
    pub weight_sum_sq: f64,
    pub design_sum: f64,
    pub sigma_hat: f64,
    pub stderr: f64,
    pub intervals: Vec<Interval>,
    pub diagnostics: TaleDiagnostics,
}

impl TaleResult {
    /// The standardized pivot at a hypothesised true value.
    pub fn pivot(&self, theta_true: f64) -> f64 {
        (self.theta_hat - theta_true) / self.stderr
    }

    pub fn to_report(&self) -> EstimateReport {
        EstimateReport {
            method: Method::Tale,
            estimate: vec![self.theta_hat],
            stderr: Some(vec![self.stderr]),
            intervals: self
                .intervals
                .iter()
                .map(|iv| IntervalSet {
                    alpha: iv.alpha,
                    lower: vec![iv.lower],
                    upper: vec![iv.upper],
                })
                .collect(),
            target_idx: vec![self.target],
            sigma_hat: self.sigma_hat,
        }
    }
}

/// TALE with the OLS non-adaptive coefficients as prior.
pub fn tale_estimate(ds: &AdaptiveDataset, cfg: &TaleConfig) -> Result<TaleResult> {
    run(ds, cfg, None)
}

/// TALE with a caller-supplied prior for the non-adaptive coefficients
/// (ordered as [`AdaptiveDataset::nonadaptive_idx`]).
pub fn tale_estimate_with_prior(
    ds: &AdaptiveDataset,
    prior_nad: &[f64],
    cfg: &TaleConfig,
) -> Result<TaleResult> {
    run(ds, cfg, Some(prior_nad))
}

fn run(ds: &AdaptiveDataset, cfg: &TaleConfig, prior: Option<&[f64]>) -> Result<TaleResult> {
    cfg.validate()?;
    let target = match ds.adaptive_idx() {
        [j] => *j,
        other => {
            return Err(Error::InvalidInput(format!(
                "TALE handles exactly one adaptive coordinate, got {}",
                other.len()
            )))
        }
    };
    let (n, d) = (ds.n(), ds.d());
    if n <= d {
        return Err(Error::InvalidInput(format!(
            "TALE needs n > d (n = {n}, d = {d})"
        )));
    }
    let nad_idx = ds.nonadaptive_idx();
    // OLS is needed for the default prior and for a residual noise estimate
    let fit = if prior.is_none() || cfg.sigma_hat == SigmaHat::Residual {
        Some(solve_least_squares(ds.x(), ds.y())?)
    } else {
        None
    };
    let ols_nad: Option<Vec<f64>> = fit
        .as_ref()
        .map(|f| nad_idx.iter().map(|&j| f.coefficients[j]).collect());
    let prior_nad: Vec<f64> = match prior {
        Some(p) => {
            if p.len() != nad_idx.len() {
                return Err(Error::InvalidInput(format!(
                    "prior has length {} but there are {} non-adaptive coordinates",
                    p.len(),
                    nad_idx.len()
                )));
            }
            p.to_vec()
        }
        None => ols_nad.clone().expect("OLS fit exists without a prior"),
    };

    let x = ds.x();
    let x_ad: Vec<f64> = x.column(target).iter().copied().collect();
    let weights = tale_weights(&x_ad, cfg.s0)?;
    let w = &weights.w;

    let nad_fit = |i: usize, coef: &[f64]| -> f64 {
        nad_idx.iter().zip(coef).map(|(&j, c)| x[(i, j)] * c).sum()
    };
    let numerator = stable_sum((0..n).map(|i| w[i] * (ds.y()[i] - nad_fit(i, &prior_nad))));
    let design_sum = stable_sum((0..n).map(|i| w[i] * x_ad[i]));
    if design_sum == 0.0 || !design_sum.is_finite() {
        return Err(Error::DegenerateDesign(
            "weighted design sum Σ w_i x_i^ad vanishes".into(),
        ));
    }
    let theta_hat = numerator / design_sum;
    let weight_sum_sq = stable_sum(w.iter().map(|v| v * v));

    let rss = fit.as_ref().map_or(f64::NAN, |f| f.rss());
    let sigma_hat = cfg.sigma_hat.resolve(rss, n - d)?;
    let stderr = sigma_hat * weight_sum_sq.sqrt() / design_sum.abs();
    let intervals = cfg
        .alpha_levels
        .iter()
        .map(|&alpha| {
            let half = z_two_sided(alpha) * stderr;
            Interval {
                alpha,
                lower: theta_hat - half,
                upper: theta_hat + half,
            }
        })
        .collect();

    let diagnostics = TaleDiagnostics {
        noise_proxy: fit
            .as_ref()
            .map(|f| stable_sum((0..n).map(|i| w[i] * f.residuals[i]))),
        prior_bias_proxy: ols_nad.as_ref().map(|ols| {
            let diff: Vec<f64> = ols.iter().zip(&prior_nad).map(|(a, b)| a - b).collect();
            stable_sum((0..n).map(|i| w[i] * nad_fit(i, &diff)))
        }),
        max_abs_weight: w.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        s_ratio: weights.s.last().copied().unwrap_or(cfg.s0) / cfg.s0,
    };

    Ok(TaleResult {
        target,
        theta_hat,
        weight_sum_sq,
        design_sum,
        sigma_hat,
        stderr,
        intervals,
        diagnostics,
    })
}

/// Left-hand side of the estimating equation,
/// `Σ w_i (y_i − x_i^ad θ − x_i^nadᵀ prior)`, evaluated at `theta`.
pub fn estimating_equation_residual(
    ds: &AdaptiveDataset,
    prior_nad: &[f64],
    w: &[f64],
    theta: f64,
) -> f64 {
    let target = ds.adaptive_idx()[0];
    let nad_idx = ds.nonadaptive_idx();
    let x = ds.x();
    let y: &DVector<f64> = ds.y();
    stable_sum((0..ds.n()).map(|i| {
        let nad: f64 = nad_idx
            .iter()
            .zip(prior_nad)
            .map(|(&j, c)| x[(i, j)] * c)
            .sum();
        w[i] * (y[i] - x[(i, target)] * theta - nad)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GenerationMeta;
    use nalgebra::DMatrix;

    #[test]
    fn f_at_one() {
        let want = 1.0 / (2.0_f64.sqrt() * 2.0_f64.ln());
        assert!((f_weight(1.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 1.020139).abs() < 1e-6);
        assert!(f_weight(2.0).unwrap() < f_weight(1.0).unwrap());
    }

    #[test]
    fn f_domain() {
        assert!(matches!(f_weight(0.999), Err(Error::Domain(_))));
        assert!(f_weight(f64::NAN).is_err());
    }

    #[test]
    fn f_strictly_decreasing_on_dense_grid() {
        // log-spaced grid on [1, 1e6]
        let mut prev = f_weight(1.0).unwrap();
        for i in 1..=20_000 {
            let x = 10f64.powf(6.0 * i as f64 / 20_000.0);
            let v = f_weight(x).unwrap();
            assert!(v > 0.0 && v < prev, "not decreasing at {x}");
            prev = v;
        }
    }

    #[test]
    fn zero_column_gives_zero_weights() {
        let tw = tale_weights(&[0.0; 5], 1.5).unwrap();
        assert!(tw.w.iter().all(|&w| w == 0.0));
        assert!(tw.s.iter().all(|&s| s == 1.5));
    }

    #[test]
    fn single_observation_weight() {
        let tw = tale_weights(&[1.0], 1.0).unwrap();
        assert_eq!(tw.s, vec![2.0]);
        // f(2) by hand: 1/sqrt(2 (2 + ln 2) (ln(2 + ln 2))^2)
        let l = 2.0 + 2.0_f64.ln();
        let f2 = 1.0 / (2.0 * l).sqrt() / l.ln();
        assert!((tw.w[0] - f2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_s0() {
        assert!(tale_weights(&[1.0], 0.0).is_err());
        assert!(tale_weights(&[1.0], -1.0).is_err());
    }

    #[test]
    fn default_s0_schedule() {
        assert!((default_s0(1000) - 1000f64.ln().ln()).abs() < 1e-15);
        assert_eq!(default_s0(1), MIN_DEFAULT_S0);
        assert_eq!(default_s0(2), MIN_DEFAULT_S0);
        assert!(default_s0(3) > MIN_DEFAULT_S0);
    }

    fn small_dataset(noise: &[f64]) -> (AdaptiveDataset, Vec<f64>) {
        let n = noise.len();
        let theta = [0.8, -0.4, 1.2];
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => ((i * 7 + 3) % 5 != 0) as i32 as f64,
            1 => ((i as f64) * 0.37).sin(),
            _ => ((i as f64) * 1.3 + 0.5).cos(),
        });
        let y = DVector::from_fn(n, |i, _| {
            (0..3).map(|j| x[(i, j)] * theta[j]).sum::<f64>() + noise[i]
        });
        (
            AdaptiveDataset::new(x, y, vec![0], GenerationMeta::default()).unwrap(),
            theta.to_vec(),
        )
    }

    #[test]
    fn exact_prior_and_no_noise_recovers_truth() {
        let (ds, theta) = small_dataset(&[0.0; 40]);
        let cfg = TaleConfig::for_sample_size(40, SigmaHat::Residual, vec![0.1]);
        let res = tale_estimate_with_prior(&ds, &theta[1..], &cfg).unwrap();
        assert!((res.theta_hat - theta[0]).abs() < 1e-12);
        assert!(res.sigma_hat < 1e-12);
    }

    #[test]
    fn closed_form_solves_the_equation() {
        let noise: Vec<f64> = (0..60)
            .map(|i| ((i * 31 % 17) as f64 - 8.0) / 10.0)
            .collect();
        let (ds, _) = small_dataset(&noise);
        let cfg = TaleConfig::for_sample_size(60, SigmaHat::Plugin(0.5), vec![0.05, 0.2]);
        let res = tale_estimate(&ds, &cfg).unwrap();
        let fit = solve_least_squares(ds.x(), ds.y()).unwrap();
        let prior = [fit.coefficients[1], fit.coefficients[2]];
        let w = tale_weights(
            &ds.x().column(0).iter().copied().collect::<Vec<_>>(),
            cfg.s0,
        )
        .unwrap()
        .w;
        let r = estimating_equation_residual(&ds, &prior, &w, res.theta_hat);
        let scale: f64 = w
            .iter()
            .zip(ds.y().iter())
            .map(|(a, b)| (a * b).abs())
            .sum();
        assert!(r.abs() <= 1e-9 * scale, "{r}");
        assert!(res.diagnostics.prior_bias_proxy.unwrap().abs() < 1e-12);
        let expect_se = 0.5 * res.weight_sum_sq.sqrt() / res.design_sum.abs();
        assert!((res.stderr - expect_se).abs() < 1e-15);
        let rep = res.to_report();
        let iv = rep.interval(0.05).unwrap();
        assert!(iv.lower[0] < res.theta_hat && res.theta_hat < iv.upper[0]);
    }

    #[test]
    fn degenerate_design() {
        let (ds, _) = small_dataset(&[0.1; 20]);
        let mut x = ds.x().clone();
        x.column_mut(0).fill(0.0);
        let ds =
            AdaptiveDataset::new(x, ds.y().clone(), vec![0], GenerationMeta::default()).unwrap();
        let cfg = TaleConfig::for_sample_size(20, SigmaHat::Plugin(1.0), vec![]);
        assert!(matches!(
            tale_estimate_with_prior(&ds, &[0.0, 0.0], &cfg),
            Err(Error::DegenerateDesign(_))
        ));
        // with the OLS prior the zero column already breaks the first stage
        assert!(matches!(
            tale_estimate(&ds, &cfg),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn needs_single_adaptive_coordinate() {
        let (ds, _) = small_dataset(&[0.0; 20]);
        let two = ds.with_adaptive_idx(vec![0, 1]).unwrap();
        let cfg = TaleConfig::for_sample_size(20, SigmaHat::Residual, vec![]);
        assert!(tale_estimate(&two, &cfg).is_err());
        let none = ds.with_adaptive_idx(vec![]).unwrap();
        assert!(tale_estimate(&none, &cfg).is_err());
    }
}
