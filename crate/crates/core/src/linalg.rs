//! Least-squares and projection kernels.
//!
//! Everything here goes through a Householder QR factorization. The normal
//! equations are never formed: adaptive designs are frequently
//! ill-conditioned and `XᵀX` squares the condition number.
//!
//! Numerical rank is judged on the diagonal of `R`: a column counts as
//! independent when `|R_jj| > RANK_RTOL · max_j |R_jj|`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the numerical rank check.
pub const RANK_RTOL: f64 = 1e-10;

/// A full-column-rank thin QR factorization `M = Q R`.
#[derive(Debug, Clone)]
pub struct ThinQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl ThinQr {
    /// Factorize `m` and reject it if its numerical rank is below its
    /// column count.
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = m.shape();
        if n < p {
            return Err(Error::RankDeficient { rank: n, needed: p });
        }
        if p == 0 {
            return Ok(Self {
                q: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
            });
        }
        let qr = m.clone().qr();
        let r = qr.r();
        let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0_f64, f64::max);
        let tol = RANK_RTOL * scale;
        let rank = (0..p).filter(|&j| r[(j, j)].abs() > tol).count();
        if rank < p || !scale.is_finite() {
            return Err(Error::RankDeficient { rank, needed: p });
        }
        Ok(Self { q: qr.q(), r })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    /// Least-squares coefficients for response `y`.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .expect("R has a nonzero diagonal after the rank check")
    }

    /// `(MᵀM)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn gram_inverse(&self) -> DMatrix<f64> {
        let p = self.ncols();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("R has a nonzero diagonal after the rank check");
        let g = &r_inv * r_inv.transpose();
        // symmetrize away rounding
        (&g + g.transpose()) * 0.5
    }

    /// `log det(MᵀM) = 2 Σ log |R_jj|`.
    pub fn log_det_gram(&self) -> f64 {
        (0..self.ncols())
            .map(|j| 2.0 * self.r[(j, j)].abs().ln())
            .sum()
    }

    /// Orthogonal projection of `v` onto the column space.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.q * self.q.tr_mul(v)
    }

    /// `(I − P) v`.
    pub fn residualize(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project(v)
    }

    /// `(I − P) A` applied column-wise.
    pub fn residualize_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        a - &self.q * self.q.tr_mul(a)
    }
}

/// Output of [`solve_least_squares`].
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub coefficients: DVector<f64>,
    pub gram_inverse: DMatrix<f64>,
    pub residuals: DVector<f64>,
}

impl LeastSquaresFit {
    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }
}

/// Ordinary least squares via QR. Returns the coefficients and the
/// materialized inverse Gram matrix `(XᵀX)⁻¹`.
pub fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquaresFit> {
    check_rows(x, y)?;
    let qr = ThinQr::new(x)?;
    let coefficients = qr.solve(y);
    let residuals = y - x * &coefficients;
    Ok(LeastSquaresFit {
        coefficients,
        gram_inverse: qr.gram_inverse(),
        residuals,
    })
}

/// Orthogonal projection of `v` onto the column space of `m`.
pub fn projection_onto_columns(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if m.nrows() != v.len() {
        return Err(Error::InvalidInput(format!(
            "projection: matrix has {} rows but vector has length {}",
            m.nrows(),
            v.len()
        )));
    }
    Ok(ThinQr::new(m)?.project(v))
}

/// Column-wise centering `(I − P_1) M`.
pub fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let n = m.nrows();
    if n == 0 {
        return out;
    }
    for mut col in out.column_iter_mut() {
        // second pass removes the rounding left by the first
        for _ in 0..2 {
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
        }
    }
    out
}

/// Center a vector by its mean.
pub fn center_vector(v: &DVector<f64>) -> DVector<f64> {
    let mut out = v.clone();
    if v.is_empty() {
        return out;
    }
    let n = v.len() as f64;
    for _ in 0..2 {
        let mean = out.sum() / n;
        out.add_scalar_mut(-mean);
    }
    out
}

/// Columns of `m` listed in `idx`, in that order.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_columns(idx)
}

/// Indices `0..d` not contained in `idx`, ascending.
pub fn complement(d: usize, idx: &[usize]) -> Vec<usize> {
    (0..d).filter(|j| !idx.contains(j)).collect()
}

fn check_rows(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput(format!(
            "design has {} rows but response has length {}",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}
