//! W-decorrelation baseline.
//!
//! The decorrelating matrix `W = [w_1 … w_n]` (`d × n`) is built online:
//!
//! ```text
//! w_i = (I − Σ_{t<i} w_t x_tᵀ) x_i / (λ + ‖x_i‖²)
//! ```
//!
//! and the estimate is `θ^d = θ̂_OLS + W (y − X θ̂_OLS)` with normal
//! intervals from the variance `σ̂² W Wᵀ`. `λ` is calibrated so that
//! `λ · log n` is the `1/n`-quantile of `σ_min(XᵀX)` over i.i.d. designs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{draw_iid_design, GeneratorConfig};
use crate::linalg::solve_least_squares;
use crate::model::{AdaptiveDataset, EstimateReport, Method};
use crate::stats::empirical_quantile;

use super::{check_alphas, normal_intervals, SigmaHat};

pub fn w_decorrelation(
    ds: &AdaptiveDataset,
    lambda: f64,
    alphas: &[f64],
    sigma: SigmaHat,
) -> Result<EstimateReport> {
    check_alphas(alphas)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "W-decorrelation needs lambda > 0, got {lambda}"
        )));
    }
    let (n, d) = (ds.n(), ds.d());
    let fit = solve_least_squares(ds.x(), ds.y())?;
    let sigma_hat = sigma.resolve(fit.rss(), n.saturating_sub(d))?;

    // running W_{i-1} X_{i-1}, W r and W Wᵀ
    let mut wx = DMatrix::<f64>::zeros(d, d);
    let mut correction = DVector::<f64>::zeros(d);
    let mut wwt = DMatrix::<f64>::zeros(d, d);
    let mut w = DVector::<f64>::zeros(d);
    for i in 0..n {
        let xi: DVector<f64> = ds.x().row(i).transpose();
        let scale = 1.0 / (lambda + xi.norm_squared());
        w.copy_from(&xi);
        w.gemv(-scale, &wx, &xi, scale);
        wx.ger(1.0, &w, &xi, 1.0);
        wwt.ger(1.0, &w, &w, 1.0);
        correction.axpy(fit.residuals[i], &w, 1.0);
    }

    let estimate: Vec<f64> = (&fit.coefficients + &correction).iter().copied().collect();
    let stderr: Vec<f64> = (0..d)
        .map(|j| sigma_hat * wwt[(j, j)].max(0.0).sqrt())
        .collect();
    Ok(EstimateReport {
        method: Method::WDecorrelation,
        intervals: normal_intervals(&estimate, &stderr, alphas),
        estimate,
        stderr: Some(stderr),
        target_idx: (0..d).collect(),
        sigma_hat,
    })
}

/// Empirical `q`-quantile of `σ_min(XᵀX)` over `n_mc` i.i.d. designs drawn
/// from the design family of `gen` (see [`draw_iid_design`]). Draw `m` uses
/// its own RNG seeded from `(seed, m)`, so the result does not depend on
/// thread scheduling.
pub fn sigma_min_quantile(gen: &GeneratorConfig, q: f64, n_mc: usize, seed: u64) -> f64 {
    let draws: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|m| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(m as u64 + 1);
            let x = draw_iid_design(gen, &mut rng);
            let gram = x.tr_mul(&x);
            SymmetricEigen::new(gram).eigenvalues.min()
        })
        .collect();
    empirical_quantile(&draws, q)
}

/// `λ` such that `λ log n` is the empirical `1/n`-quantile of `σ_min(XᵀX)`.
pub fn calibrate_wdecorr_lambda(gen: &GeneratorConfig, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc < 100 {
        return Err(Error::InvalidInput(format!(
            "lambda calibration needs at least 100 draws, got {n_mc}"
        )));
    }
    gen.validate()?;
    let n = gen.spec.n;
    if n < 2 {
        return Err(Error::InvalidInput(
            "lambda calibration needs n >= 2 (log n must be positive)".into(),
        ));
    }
    let q = sigma_min_quantile(gen, 1.0 / n as f64, n_mc, seed);
    Ok(q / (n as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{GeneratorKind, NonadaptiveLaw};
    use crate::model::{GenerationMeta, ModelSpec};

    fn ds() -> AdaptiveDataset {
        let x = DMatrix::from_fn(40, 3, |i, j| {
            ((i * (j + 3)) as f64 * 0.41).sin() + (j == 0) as i32 as f64
        });
        let y = DVector::from_fn(40, |i, _| (i as f64 * 0.23).cos());
        AdaptiveDataset::new(x, y, vec![0], GenerationMeta::default()).unwrap()
    }

    /// W built the slow way, column by column with explicit matrices.
    fn naive_w(x: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let (n, d) = x.shape();
        let mut w = DMatrix::zeros(d, n);
        for i in 0..n {
            let xi: DVector<f64> = x.row(i).transpose();
            let wx = if i == 0 {
                DMatrix::zeros(d, d)
            } else {
                w.columns(0, i) * x.rows(0, i)
            };
            let col = (DMatrix::identity(d, d) - wx) * &xi / (lambda + xi.norm_squared());
            w.set_column(i, &col);
        }
        w
    }

    #[test]
    fn matches_explicit_construction() {
        let data = ds();
        let lambda = 2.5;
        let rep = w_decorrelation(&data, lambda, &[0.1], SigmaHat::Plugin(1.0)).unwrap();
        let w = naive_w(data.x(), lambda);
        let fit = solve_least_squares(data.x(), data.y()).unwrap();
        let want = &fit.coefficients + &w * &fit.residuals;
        let wwt = &w * w.transpose();
        for j in 0..3 {
            assert!((rep.estimate[j] - want[j]).abs() < 1e-12);
            let se = rep.stderr.as_ref().unwrap()[j];
            assert!((se - wwt[(j, j)].sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn large_lambda_recovers_ols() {
        let data = ds();
        let rep = w_decorrelation(&data, 1e12, &[], SigmaHat::Residual).unwrap();
        let fit = solve_least_squares(data.x(), data.y()).unwrap();
        for j in 0..3 {
            assert!((rep.estimate[j] - fit.coefficients[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        assert!(w_decorrelation(&ds(), 0.0, &[], SigmaHat::Residual).is_err());
    }

    fn scalar_gaussian() -> GeneratorConfig {
        GeneratorConfig {
            kind: GeneratorKind::Iid,
            spec: ModelSpec::new(vec![1.0], 1.0, 1, 0).unwrap(),
            p_exploit: 0.0,
            nonadaptive_law: NonadaptiveLaw::StandardGaussian,
            seed: 0,
        }
    }

    #[test]
    fn chi_square_quantile_oracle() {
        // X ~ N(0,1) scalar, σ_min(XᵀX) = X² ~ χ²_1; the 0.001-quantile is
        // Φ⁻¹(0.5005)² ≈ 1.5708e-6
        let z = crate::stats::z_two_sided(0.999);
        let want = z * z;
        assert!((want - 1.5708e-6).abs() < 1e-9);
        let got = sigma_min_quantile(&scalar_gaussian(), 0.001, 400_000, 5);
        assert!((got / want - 1.0).abs() < 0.15, "got {got}, want {want}");
    }

    #[test]
    fn calibration_is_deterministic() {
        let gen = GeneratorConfig {
            kind: GeneratorKind::TreatmentAssignment,
            spec: ModelSpec::new(crate::generators::treatment_theta(5), 0.3, 100, 1).unwrap(),
            p_exploit: 0.8,
            nonadaptive_law: NonadaptiveLaw::StandardGaussian,
            seed: 0,
        };
        let a = calibrate_wdecorr_lambda(&gen, 200, 9).unwrap();
        let b = calibrate_wdecorr_lambda(&gen, 200, 9).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
        assert!(calibrate_wdecorr_lambda(&gen, 50, 9).is_err());
    }
}
