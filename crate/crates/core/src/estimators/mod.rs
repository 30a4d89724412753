//! Estimators for adaptive linear models.
//!
//! All estimators are pure functions of the dataset and their settings; no
//! randomness enters here (the W-decorrelation calibration draws its own
//! seeded designs, see [`calibrate_wdecorr_lambda`]).

mod centered;
mod concentration;
mod ols;
mod tale;
mod wdecorr;

pub use centered::centered_ols;
pub use concentration::concentration_ci;
pub use ols::{estimate_sigma, ols_report};
pub use tale::{
    default_s0, estimating_equation_residual, f_weight, tale_estimate, tale_estimate_with_prior,
    tale_weights, TaleConfig, TaleDiagnostics, TaleResult, TaleWeights,
};
pub use wdecorr::{calibrate_wdecorr_lambda, sigma_min_quantile, w_decorrelation};

use crate::error::{Error, Result};
use crate::model::IntervalSet;
use crate::stats::z_two_sided;

/// How the noise level entering standard errors is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaHat {
    /// A known (or externally estimated) value.
    Plugin(f64),
    /// `√(RSS / dof)` from the estimator's own least-squares fit.
    Residual,
}

impl SigmaHat {
    fn resolve(self, rss: f64, dof: usize) -> Result<f64> {
        match self {
            SigmaHat::Plugin(s) if s >= 0.0 && s.is_finite() => Ok(s),
            SigmaHat::Plugin(s) => Err(Error::InvalidInput(format!(
                "plug-in sigma must be finite and nonnegative, got {s}"
            ))),
            SigmaHat::Residual if dof == 0 => Err(Error::InvalidInput(
                "residual noise estimate needs more rows than parameters".into(),
            )),
            SigmaHat::Residual => Ok((rss / dof as f64).sqrt()),
        }
    }
}

pub(crate) fn check_alphas(alphas: &[f64]) -> Result<()> {
    for &a in alphas {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidInput(format!(
                "confidence levels need alpha in (0, 1), got {a}"
            )));
        }
    }
    Ok(())
}

/// `estimate ± z_{1−α/2} · stderr` for each level.
pub(crate) fn normal_intervals(
    estimate: &[f64],
    stderr: &[f64],
    alphas: &[f64],
) -> Vec<IntervalSet> {
    alphas
        .iter()
        .map(|&alpha| {
            let z = z_two_sided(alpha);
            IntervalSet {
                alpha,
                lower: estimate
                    .iter()
                    .zip(stderr)
                    .map(|(e, s)| e - z * s)
                    .collect(),
                upper: estimate
                    .iter()
                    .zip(stderr)
                    .map(|(e, s)| e + z * s)
                    .collect(),
            }
        })
        .collect()
}
