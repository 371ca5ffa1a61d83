//! One-sided (Hestenes) Jacobi SVD.
//!
//! Singular values come out sorted nonincreasing. Column signs are fixed so
//! that the largest-magnitude entry of every left singular vector is positive
//! (first such entry on ties), which makes the factorisation reproducible.

use super::{check_finite, orth_complement, rank_threshold, Matrix};
use crate::Result;
use nalgebra::DVector;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(sigma) V^T` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rank(&self, tol: f64) -> usize {
        let cut = rank_threshold(self.sigma.first().copied().unwrap_or(0.0), tol, 0.0);
        self.sigma.iter().filter(|&&s| s > cut).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Full SVD: `U` is `m x m`, `V` is `n x n`, `sigma` has `min(m, n)` entries.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl FullSvd {
    pub fn thin(&self) -> SvdFactors {
        let k = self.sigma.len();
        SvdFactors {
            u: self.u.columns(0, k).into_owned(),
            sigma: self.sigma.clone(),
            v: self.v.columns(0, k).into_owned(),
        }
    }
}

pub fn svd(a: &Matrix) -> Result<SvdFactors> {
    Ok(svd_full(a)?.thin())
}

pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.iter().any(|x| !x.is_finite()) {
        return vec![f64::NAN; a.nrows().min(a.ncols())];
    }
    full_unchecked(a).sigma
}

pub fn svd_full(a: &Matrix) -> Result<FullSvd> {
    check_finite(a)?;
    Ok(full_unchecked(a))
}

fn full_unchecked(a: &Matrix) -> FullSvd {
    let (m, n) = a.shape();
    let (mut u, sigma, mut v) = if m >= n {
        tall(a)
    } else {
        let (u, s, v) = tall(&a.transpose());
        (v, s, u)
    };
    // sign convention on U, mirrored onto V for the paired columns
    for j in 0..m {
        let col = u.column(j);
        let mut best = 0;
        for i in 1..m {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.column_mut(j).neg_mut();
            if j < n {
                v.column_mut(j).neg_mut();
            }
        }
    }
    FullSvd { u, sigma, v }
}

/// Jacobi SVD for `m >= n`. Returns full `U` (`m x m`), sigma, `V` (`n x n`).
fn tall(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = Matrix::identity(n, n);
    let eps = f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);

    // Left vectors: normalised columns of A V, re-orthogonalised in order of
    // decreasing sigma; null or numerically dependent directions are filled
    // from the orthogonal complement of the accepted ones.
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut slots: Vec<Option<usize>> = vec![None; m];
    for (slot, &j) in order.iter().enumerate() {
        let wj = w.column(j).into_owned();
        let wn = wj.norm();
        if wn == 0.0 {
            continue;
        }
        let mut r = wj;
        for _ in 0..2 {
            for q in &accepted {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let rn = r.norm();
        if rn > 1e-8 * wn && rn > f64::MIN_POSITIVE {
            slots[slot] = Some(accepted.len());
            accepted.push(r / rn);
        }
    }
    let basis = if accepted.is_empty() {
        Matrix::zeros(m, 0)
    } else {
        Matrix::from_columns(&accepted)
    };
    let fill = orth_complement_unchecked(&basis);
    let mut u = Matrix::zeros(m, m);
    let mut next_fill = 0;
    for (slot, pick) in slots.iter().enumerate() {
        match pick {
            Some(k) => u.set_column(slot, &accepted[*k]),
            None => {
                u.set_column(slot, &fill.column(next_fill));
                next_fill += 1;
            }
        }
    }
    (u, sigma, v_sorted)
}

fn rotate(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..a.nrows() {
        let x = a[(i, p)];
        let y = a[(i, q)];
        a[(i, p)] = c * x - s * y;
        a[(i, q)] = s * x + c * y;
    }
}

fn orth_complement_unchecked(u: &Matrix) -> Matrix {
    // `u` is orthonormal by construction here
    orth_complement(u).expect("orthonormal basis")
}
