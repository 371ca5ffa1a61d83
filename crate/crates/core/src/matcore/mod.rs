//! Dense real matrix kernel.
//!
//! [`Matrix`] is a column-major `nalgebra::DMatrix<f64>`. Zero-width matrices
//! (`n x 0`) are valid and represent empty bases.

mod io;
mod qr;
mod rng;
mod svd;

pub use io::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use qr::{haar_orthogonal, householder_qr, orth_complement};
pub use rng::RandomSource;
pub use svd::{singular_values, svd, svd_full, FullSvd, SvdFactors};

use crate::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;

/// Rank threshold shared by every rank decision: `tol * max(sigma_1, scale)`.
///
/// With `scale = 0` this is the plain relative test `sigma_i > tol * sigma_1`;
/// a zero matrix has rank 0.
pub fn rank_threshold(sigma_max: f64, tol: f64, scale: f64) -> f64 {
    tol * sigma_max.max(scale)
}

pub fn check_finite(a: &Matrix) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

pub fn check_shape(a: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if a.nrows() == rows && a.ncols() == cols {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Frobenius inner product `<A, B> = tr(A^T B)`.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

/// `||U^T U - I||_F`.
pub fn orthonormality_residual(u: &Matrix) -> f64 {
    let p = u.ncols();
    (u.transpose() * u - Matrix::identity(p, p)).norm()
}

/// Orthogonal projector `U U^T` onto the span of a column-orthonormal `U`.
pub fn projector(u: &Matrix) -> Matrix {
    u * u.transpose()
}

/// Horizontal concatenation; all parts must share the row count `rows`.
pub fn hcat(rows: usize, parts: &[&Matrix]) -> Matrix {
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c0 = 0;
    for p in parts {
        debug_assert_eq!(p.nrows(), rows);
        out.view_mut((0, c0), (rows, p.ncols())).copy_from(*p);
        c0 += p.ncols();
    }
    out
}

/// Assemble `[A B; C D]`.
pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    let (k, l) = (a.nrows(), a.ncols());
    let mut out = Matrix::zeros(k + c.nrows(), l + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, l), b.shape()).copy_from(b);
    out.view_mut((k, 0), c.shape()).copy_from(c);
    out.view_mut((k, l), d.shape()).copy_from(d);
    out
}

/// Copy of the `rows x cols` sub-block starting at `(r0, c0)`.
pub fn sub(a: &Matrix, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
    a.view((r0, c0), (rows, cols)).into_owned()
}

pub fn columns(a: &Matrix, c0: usize, cols: usize) -> Matrix {
    sub(a, 0, c0, a.nrows(), cols)
}

/// Moore-Penrose pseudoinverse `V Sigma^+ U^T`, inverting singular values
/// above `DEFAULT_RANK_TOL * sigma_1`.
pub fn pinv(a: &Matrix) -> Result<Matrix> {
    pinv_tol(a, crate::DEFAULT_RANK_TOL)
}

pub fn pinv_tol(a: &Matrix, tol: f64) -> Result<Matrix> {
    let f = svd(a)?;
    let cut = rank_threshold(f.sigma.first().copied().unwrap_or(0.0), tol, 0.0);
    let mut out = Matrix::zeros(a.ncols(), a.nrows());
    for (j, &s) in f.sigma.iter().enumerate() {
        if s > cut {
            out += (f.v.column(j) * f.u.column(j).transpose()) / s;
        }
    }
    Ok(out)
}

/// The `l x l` anti-identity `J_l`.
pub fn reversal(l: usize) -> Matrix {
    Matrix::from_fn(l, l, |i, j| if i + j + 1 == l { 1.0 } else { 0.0 })
}

/// Largest singular value (0 for empty matrices).
pub fn spectral_norm(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Diagonal `rows x cols` matrix with the given leading diagonal entries.
pub fn diag_rect(rows: usize, cols: usize, d: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(rows, cols);
    for (i, &x) in d.iter().enumerate().take(rows.min(cols)) {
        out[(i, i)] = x;
    }
    out
}

pub fn diag(d: &[f64]) -> Matrix {
    diag_rect(d.len(), d.len(), d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_diagonal() {
        let p = pinv(&diag(&[2.0, 0.0])).unwrap();
        assert!((p - diag(&[0.5, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn pinv_of_orthonormal_columns_is_transpose() {
        let mut rng = RandomSource::new(4);
        let q = haar_orthogonal(5, &mut rng);
        let u = columns(&q, 0, 3);
        assert!((pinv(&u).unwrap() - u.transpose()).norm() < 1e-12);
    }

    #[test]
    fn penrose_identities_on_rank_two() {
        let mut rng = RandomSource::new(7);
        let x = rng.gaussian(4, 2) * rng.gaussian(2, 4);
        let xp = pinv(&x).unwrap();
        assert!((&x * &xp * &x - &x).norm() <= 1e-8);
        assert!((&xp * &x * &xp - &xp).norm() <= 1e-8);
        let xxp = &x * &xp;
        let xpx = &xp * &x;
        assert!((&xxp - xxp.transpose()).norm() <= 1e-8);
        assert!((&xpx - xpx.transpose()).norm() <= 1e-8);
    }

    #[test]
    fn reversal_matrices() {
        assert_eq!(reversal(0).shape(), (0, 0));
        assert_eq!(reversal(2), Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let j3 = reversal(3);
        assert_eq!(&j3 * &j3, Matrix::identity(3, 3));
        assert_eq!(singular_values(&j3).len(), 3);
    }

    #[test]
    fn spectral_norms() {
        assert_eq!(spectral_norm(&diag(&[3.0, 2.0])), 3.0);
        assert_eq!(spectral_norm(&Matrix::zeros(3, 2)), 0.0);
        let p = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((spectral_norm(&p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn block_assembly_round_trip() {
        let mut rng = RandomSource::new(1);
        let m = rng.gaussian(5, 4);
        let rebuilt = block2x2(
            &sub(&m, 0, 0, 2, 1),
            &sub(&m, 0, 1, 2, 3),
            &sub(&m, 2, 0, 3, 1),
            &sub(&m, 2, 1, 3, 3),
        );
        assert_eq!(rebuilt, m);
    }
}
