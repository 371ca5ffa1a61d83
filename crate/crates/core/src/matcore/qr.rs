use super::{orthonormality_residual, Matrix, RandomSource};
use crate::{Error, Result};

/// Full Householder QR: `A = Q R` with `Q` square orthogonal (`m x m`) and
/// `R` upper trapezoidal (`m x n`).
pub fn householder_qr(a: &Matrix) -> (Matrix, Matrix) {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut q = Matrix::identity(m, m);
    for k in 0..n.min(m.saturating_sub(1)) {
        let x = r.view((k, k), (m - k, 1)).into_owned();
        let alpha = x.norm();
        if alpha == 0.0 {
            continue;
        }
        let mut v = x;
        let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += s * alpha;
        let vn = v.norm();
        if vn == 0.0 {
            continue;
        }
        v /= vn;
        // R <- H R on the trailing rows; Q <- Q H on the trailing columns
        let mut rt = r.view_mut((k, 0), (m - k, n));
        let w = v.transpose() * &rt;
        rt -= 2.0 * &v * w;
        let mut qt = q.view_mut((0, k), (m, m - k));
        let w = &qt * &v;
        qt -= 2.0 * w * v.transpose();
    }
    (q, r)
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// column-orthonormal `u` (`n x p`): an `n x (n - p)` matrix `W` with
/// `U^T W = 0`.
pub fn orth_complement(u: &Matrix) -> Result<Matrix> {
    let (n, p) = u.shape();
    if p > n {
        return Err(Error::InvalidInput(format!(
            "orth_complement: {p} columns exceed ambient dimension {n}"
        )));
    }
    if u.iter().any(|x| !x.is_finite()) || orthonormality_residual(u) > 1e-8 {
        return Err(Error::InvalidInput(
            "orth_complement: columns are not orthonormal".into(),
        ));
    }
    if p == 0 {
        return Ok(Matrix::identity(n, n));
    }
    let (q, _) = householder_qr(u);
    let mut w = q.columns(p, n - p).into_owned();
    // one projection sweep removes the O(eps) leakage from the reflectors
    let leak = u * (u.transpose() * &w);
    w -= leak;
    for j in 0..w.ncols() {
        let nj = w.column(j).norm();
        w.column_mut(j).unscale_mut(nj);
    }
    Ok(w)
}

/// Haar-distributed `n x n` orthogonal matrix: QR of a Gaussian matrix with
/// the sign of `diag(R)` absorbed into `Q`.
pub fn haar_orthogonal(n: usize, rng: &mut RandomSource) -> Matrix {
    let g = rng.gaussian(n, n);
    let (mut q, r) = householder_qr(&g);
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
