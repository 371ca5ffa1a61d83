use crate::matcore::{orth_complement, orthonormality_residual, projector, spectral_norm, svd, Matrix};
use crate::{Error, Result};

/// A linear subspace of `R^n` given by an orthonormal basis (`n x p`).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    pub fn new(basis: Matrix) -> Result<Self> {
        if orthonormality_residual(&basis) > 1e-10 {
            return Err(Error::InvalidInput("subspace basis is not orthonormal".into()));
        }
        Ok(Self { basis })
    }

    /// Orthonormal basis of the column span of `a`, at relative rank
    /// tolerance `tol`.
    pub fn span_of(a: &Matrix, tol: f64) -> Result<Self> {
        let s = svd(a)?;
        let k = s.rank(tol);
        Ok(Self {
            basis: s.u.columns(0, k).into_owned(),
        })
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn projector(&self) -> Matrix {
        projector(&self.basis)
    }

    pub fn orthogonal_complement(&self) -> Result<Self> {
        Ok(Self {
            basis: orth_complement(&self.basis)?,
        })
    }

    /// Euclidean distance from a vector (`ambient x 1`) to the subspace.
    pub fn distance(&self, v: &Matrix) -> f64 {
        let coeff = self.basis.transpose() * v;
        (v.norm_squared() - coeff.norm_squared()).max(0.0).sqrt()
    }
}

/// `|P_1 - P_2|_2` for subspaces of equal dimension in the same space.
pub fn gap_distance(a: &Subspace, b: &Subspace) -> Result<f64> {
    if a.ambient() != b.ambient() || a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "gap distance needs equal dimensions, got {} in R^{} and {} in R^{}",
            a.dim(),
            a.ambient(),
            b.dim(),
            b.ambient()
        )));
    }
    Ok(spectral_norm(&(a.projector() - b.projector())))
}

/// Row-major vectorisation as an `mn x 1` matrix.
pub fn vec_rows(a: &Matrix) -> Matrix {
    Matrix::from_iterator(a.len(), 1, a.transpose().iter().copied())
}

pub fn unvec_rows(v: &Matrix, rows: usize, cols: usize) -> Matrix {
    Matrix::from_row_slice(rows, cols, v.as_slice())
}

/// Normal space `{U_perp W V_perp^T}` of the fixed-rank manifold, as a
/// subspace of `R^{mn}` under row-major vectorisation
/// (`vec(u v^T) = u (x) v`).
pub fn normal_space(u_perp: &Matrix, v_perp: &Matrix) -> Result<Subspace> {
    Subspace::new(u_perp.kronecker(v_perp))
}

/// Tangent space of the fixed-rank manifold at a point with column-space
/// complement `u_perp` and row-space complement `v_perp`.
pub fn tangent_space(u_perp: &Matrix, v_perp: &Matrix) -> Result<Subspace> {
    normal_space(u_perp, v_perp)?.orthogonal_complement()
}
