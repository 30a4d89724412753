use crate::error::{Error, Result};
use crate::linalg::{center_columns, center_vector, solve_least_squares};
use crate::model::{AdaptiveDataset, EstimateReport, Method};

use super::{check_alphas, normal_intervals, SigmaHat};

/// Centered OLS: subtract column means from every covariate and the mean
/// from the response, then run OLS on the centered system.
///
/// The result coincides with the slope coefficients of OLS on `[1, X]`.
/// Standard errors come from the centered Gram inverse; the residual noise
/// estimate uses `n − d − 1` degrees of freedom to account for the
/// implicit intercept.
pub fn centered_ols(
    ds: &AdaptiveDataset,
    alphas: &[f64],
    sigma: SigmaHat,
) -> Result<EstimateReport> {
    check_alphas(alphas)?;
    let (n, d) = (ds.n(), ds.d());
    if n < d + 1 {
        return Err(Error::InvalidInput(format!(
            "centered OLS needs n >= d + 1 (n = {n}, d = {d})"
        )));
    }
    let xc = center_columns(ds.x());
    let yc = center_vector(ds.y());
    let fit = solve_least_squares(&xc, &yc)?;
    let sigma_hat = sigma.resolve(fit.rss(), n - d - 1)?;
    let estimate: Vec<f64> = fit.coefficients.iter().copied().collect();
    let stderr: Vec<f64> = (0..d)
        .map(|j| sigma_hat * fit.gram_inverse[(j, j)].max(0.0).sqrt())
        .collect();
    Ok(EstimateReport {
        method: Method::CenteredOls,
        intervals: normal_intervals(&estimate, &stderr, alphas),
        estimate,
        stderr: Some(stderr),
        target_idx: (0..d).collect(),
        sigma_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GenerationMeta;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn zero_mean_noiseless_recovery() {
        // columns already have mean zero
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        let theta = DVector::from_vec(vec![0.7, -2.0]);
        let y = &x * &theta;
        let ds = AdaptiveDataset::new(x, y, vec![0], GenerationMeta::default()).unwrap();
        let rep = centered_ols(&ds, &[], SigmaHat::Residual).unwrap();
        assert!((rep.estimate[0] - 0.7).abs() < 1e-12);
        assert!((rep.estimate[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_shift_is_absorbed() {
        let x = DMatrix::from_row_slice(5, 1, &[1.0, 2.0, 4.0, 7.0, 11.0]);
        let y = x.column(0).map(|v| 3.0 + 0.5 * v);
        let ds = AdaptiveDataset::new(x, y, vec![0], GenerationMeta::default()).unwrap();
        let rep = centered_ols(&ds, &[0.1], SigmaHat::Residual).unwrap();
        assert!((rep.estimate[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        let ds = AdaptiveDataset::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
            vec![],
            GenerationMeta::default(),
        )
        .unwrap();
        assert!(centered_ols(&ds, &[], SigmaHat::Residual).is_err());
    }

    #[test]
    fn constant_column_is_rank_deficient_after_centering() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.1, 1.0, 0.5, 1.0, -0.2, 1.0, 0.9]);
        let ds =
            AdaptiveDataset::new(x, DVector::zeros(4), vec![0], GenerationMeta::default()).unwrap();
        assert!(matches!(
            centered_ols(&ds, &[], SigmaHat::Residual),
            Err(Error::RankDeficient { .. })
        ));
    }
}
