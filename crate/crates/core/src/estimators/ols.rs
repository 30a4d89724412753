use crate::error::{Error, Result};
use crate::linalg::solve_least_squares;
use crate::model::{AdaptiveDataset, EstimateReport, Method};

use super::{check_alphas, normal_intervals, SigmaHat};

/// OLS on the full design with naive normal intervals
/// `θ̂_j ± z σ̂ √((XᵀX)⁻¹_jj)`. Under adaptive sampling these intervals are
/// not valid in general.
pub fn ols_report(ds: &AdaptiveDataset, alphas: &[f64], sigma: SigmaHat) -> Result<EstimateReport> {
    check_alphas(alphas)?;
    let fit = solve_least_squares(ds.x(), ds.y())?;
    let d = ds.d();
    let sigma_hat = sigma.resolve(fit.rss(), ds.n().saturating_sub(d))?;
    let estimate: Vec<f64> = fit.coefficients.iter().copied().collect();
    let stderr: Vec<f64> = (0..d)
        .map(|j| sigma_hat * fit.gram_inverse[(j, j)].max(0.0).sqrt())
        .collect();
    Ok(EstimateReport {
        method: Method::Ols,
        intervals: normal_intervals(&estimate, &stderr, alphas),
        estimate,
        stderr: Some(stderr),
        target_idx: (0..d).collect(),
        sigma_hat,
    })
}

/// `σ̂ = √(RSS / (n − d))` from the full OLS fit.
pub fn estimate_sigma(ds: &AdaptiveDataset) -> Result<f64> {
    if ds.n() <= ds.d() {
        return Err(Error::InvalidInput(format!(
            "noise estimate needs n > d (n = {}, d = {})",
            ds.n(),
            ds.d()
        )));
    }
    let fit = solve_least_squares(ds.x(), ds.y())?;
    Ok((fit.rss() / (ds.n() - ds.d()) as f64).sqrt())
}
