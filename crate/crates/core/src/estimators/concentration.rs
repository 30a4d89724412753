//! Non-asymptotic intervals from the self-normalized martingale bound.
//!
//! With `V̄ = XᵀX + Λ` and `Λ = I`, the self-normalized bound gives, with
//! probability at least `1 − δ`,
//!
//! ```text
//! ‖Xᵀε‖²_{V̄⁻¹} ≤ 2 σ² log(det(V̄)^{1/2} det(Λ)^{-1/2} / δ).
//! ```
//!
//! The interval for coordinate `j` is centered at OLS with half-width
//! `√(V̄⁻¹_jj) · σ̂ · √(2 log(det(V̄)^{1/2} / δ))`. It is conservative by
//! construction; only monotonicity in `δ` and coverage are relied on.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{solve_least_squares, ThinQr};
use crate::model::{AdaptiveDataset, EstimateReport, IntervalSet, Method};

use super::{check_alphas, SigmaHat};

/// Concentration interval for coordinate `target` at each confidence
/// parameter in `deltas` (each `δ` plays the role of `α`).
pub fn concentration_ci(
    ds: &AdaptiveDataset,
    target: usize,
    deltas: &[f64],
    sigma: SigmaHat,
) -> Result<EstimateReport> {
    check_alphas(deltas)?;
    let (n, d) = (ds.n(), ds.d());
    if target >= d {
        return Err(Error::InvalidInput(format!(
            "target coordinate {target} out of range for d = {d}"
        )));
    }
    let fit = solve_least_squares(ds.x(), ds.y())?;
    let sigma_hat = sigma.resolve(fit.rss(), n.saturating_sub(d))?;

    // [X; I] has Gram matrix XᵀX + I
    let mut stacked = DMatrix::zeros(n + d, d);
    stacked.rows_mut(0, n).copy_from(ds.x());
    stacked.rows_mut(n, d).fill_with_identity();
    let reg = ThinQr::new(&stacked)?;
    let half_log_det = 0.5 * reg.log_det_gram();
    let v_jj = reg.gram_inverse()[(target, target)].max(0.0);

    let center = fit.coefficients[target];
    let intervals = deltas
        .iter()
        .map(|&delta| {
            let radius = (2.0 * (half_log_det - delta.ln())).max(0.0).sqrt();
            let half = v_jj.sqrt() * sigma_hat * radius;
            IntervalSet {
                alpha: delta,
                lower: vec![center - half],
                upper: vec![center + half],
            }
        })
        .collect();
    Ok(EstimateReport {
        method: Method::ConcentrationCi,
        estimate: vec![center],
        stderr: None,
        intervals,
        target_idx: vec![target],
        sigma_hat,
    })
}
