//! Rank, distance and best approximation on `R_{<=r}^{m x n}`.

use crate::matcore::{rank_threshold, singular_values, svd, Matrix};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dimensions and rank bound of a determinantal variety.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarietyParams {
    pub m: usize,
    pub n: usize,
    pub r: usize,
}

impl VarietyParams {
    pub fn new(m: usize, n: usize, r: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParams(format!("require m, n >= 1, got {m}x{n}")));
        }
        check_rank(m, n, r)?;
        Ok(Self { m, n, r })
    }

    pub fn min_dim(&self) -> usize {
        self.m.min(self.n)
    }

    /// `r = min(m, n)`: every matrix qualifies.
    pub fn is_whole_space(&self) -> bool {
        self.r == self.min_dim()
    }
}

fn check_rank(m: usize, n: usize, r: usize) -> Result<()> {
    let max = m.min(n);
    if r > max {
        Err(Error::InvalidRank { r, max })
    } else {
        Ok(())
    }
}

fn rank_of_sigma(sigma: &[f64], tol: f64) -> usize {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    if s1 <= 0.0 {
        return 0;
    }
    let cut = rank_threshold(s1, tol, 0.0);
    sigma.iter().filter(|&&s| s > cut).count()
}

/// Number of singular values above `tol * sigma_1`; 0 for the zero matrix.
pub fn numerical_rank(x: &Matrix, tol: f64) -> usize {
    rank_of_sigma(&singular_values(x), tol)
}

/// Rank with the threshold `tol * max(sigma_1, scale)`, for blocks whose
/// noise level is set by a larger enclosing matrix.
pub fn numerical_rank_scaled(x: &Matrix, tol: f64, scale: f64) -> usize {
    let sigma = singular_values(x);
    let s1 = sigma.first().copied().unwrap_or(0.0);
    let cut = rank_threshold(s1, tol, scale);
    if s1 <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > cut).count()
}

/// `sqrt(sum_{i > r} sigma_i^2)`, the Frobenius distance to rank `<= r`.
pub fn distance_to_variety(x: &Matrix, r: usize) -> Result<f64> {
    check_rank(x.nrows(), x.ncols(), r)?;
    let sigma = singular_values(x);
    Ok(sigma.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt())
}

/// Best Frobenius approximation of rank at most `r` (truncated SVD).
///
/// When `sigma_r = sigma_{r+1}` the minimiser is not unique; the result is
/// the one selected by the SVD's ordering and sign convention.
pub fn truncate_rank(x: &Matrix, r: usize) -> Result<Matrix> {
    check_rank(x.nrows(), x.ncols(), r)?;
    let f = svd(x)?;
    let mut out = Matrix::zeros(x.nrows(), x.ncols());
    for j in 0..r {
        out += f.sigma[j] * (f.u.column(j) * f.v.column(j).transpose());
    }
    Ok(out)
}

pub fn is_member(x: &Matrix, r: usize, tol: f64) -> bool {
    numerical_rank(x, tol) <= r
}
