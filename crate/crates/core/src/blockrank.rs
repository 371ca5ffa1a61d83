//! Ranks of 2x2 block matrices `[A B; C D]` with `A` square of order `k`
//! and `rank D <= s`.

use crate::matcore::{diag_rect, reversal, rank_threshold, sub, svd_full, Matrix};
use crate::variety::numerical_rank_scaled;
use crate::{Error, Result, DEFAULT_RANK_TOL};
use serde::{Deserialize, Serialize};

/// Block sizes: `A` is `k x k`, `B` is `k x q`, `C` is `p x k`, `D` is
/// `p x q` with rank at most `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape {
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub s: usize,
}

impl BlockShape {
    pub fn new(k: usize, p: usize, q: usize, s: usize) -> Result<Self> {
        if k == 0 || p == 0 || q == 0 {
            return Err(Error::InvalidParams(format!(
                "require k, p, q >= 1, got k={k}, p={p}, q={q}"
            )));
        }
        if s > p.min(q) {
            return Err(Error::InvalidParams(format!(
                "require s <= min(p,q) = {}, got s={s}",
                p.min(q)
            )));
        }
        Ok(Self { k, p, q, s })
    }

    pub fn rows(&self) -> usize {
        self.k + self.p
    }

    pub fn cols(&self) -> usize {
        self.k + self.q
    }

    /// The `D` block (last `p` rows, last `q` columns) of `m`.
    pub fn d_block(&self, m: &Matrix) -> Matrix {
        sub(m, self.k, self.k, self.p, self.q)
    }

    /// Every valid shape with `k, p, q <= max` and `s <= min(p, q)`.
    pub fn grid(max: usize) -> Vec<BlockShape> {
        let mut out = Vec::new();
        for k in 1..=max {
            for p in 1..=max {
                for q in 1..=max {
                    for s in 0..=p.min(q) {
                        out.push(BlockShape { k, p, q, s });
                    }
                }
            }
        }
        out
    }
}

/// `k + min(k + s, p, q)`.
pub fn rank_bound(shape: BlockShape) -> usize {
    shape.k + (shape.k + shape.s).min(shape.p).min(shape.q)
}

/// `diag(J_l, J_s, 0)` with `l = k + min(k, min(p,q) - s)`: a 0/1 matrix
/// whose rank equals [`rank_bound`] while its `D` block has rank `s`.
pub fn tight_witness(shape: BlockShape) -> Matrix {
    let BlockShape { k, p, q, s } = shape;
    let l = k + k.min(p.min(q) - s);
    let mut out = Matrix::zeros(k + p, k + q);
    out.view_mut((0, 0), (l, l)).copy_from(&reversal(l));
    out.view_mut((l, l), (s, s)).copy_from(&reversal(s));
    out
}

/// Exact rank of a matrix with integer entries (fraction-free elimination).
/// Returns `None` if some entry is not an integer of moderate size.
pub fn exact_rank(a: &Matrix) -> Option<usize> {
    let (m, n) = a.shape();
    let mut rows: Vec<Vec<i128>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let x = a[(i, j)];
            if x.fract() != 0.0 || x.abs() > 1e12 {
                return None;
            }
            row.push(x as i128);
        }
        rows.push(row);
    }
    Some(bareiss_rank(rows, n))
}

fn bareiss_rank(mut a: Vec<Vec<i128>>, n: usize) -> usize {
    let m = a.len();
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..n {
        if rank == m {
            break;
        }
        let Some(piv) = (rank..m).find(|&i| a[i][col] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        for i in (rank + 1)..m {
            for j in (col + 1)..n {
                a[i][j] = (a[rank][col] * a[i][j] - a[i][col] * a[rank][j]) / prev;
            }
            a[i][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
    }
    rank
}

/// Output of [`rotate_to_low_rank_corner`]: `M = U M' V^T`.
#[derive(Debug, Clone)]
pub struct CornerRotation {
    pub u: Matrix,
    pub v: Matrix,
    pub m_prime: Matrix,
    /// Numerical rank of `M` used by the construction.
    pub rank: usize,
    /// `sigma_1(M)`; rank decisions on blocks of `M'` are measured against it.
    pub scale: f64,
}

impl CornerRotation {
    pub fn d_prime(&self, k: usize) -> Matrix {
        let (rows, cols) = self.m_prime.shape();
        sub(&self.m_prime, k, k, rows - k, cols - k)
    }

    pub fn d_prime_rank(&self, k: usize, tol: f64) -> usize {
        numerical_rank_scaled(&self.d_prime(k), tol, self.scale)
    }
}

/// Orthogonal `U`, `V` such that `M' = U^T M V` has a `D'` block of rank at
/// most `min(s, max(min(p,q) - k, 0))`, for `M` of rank at most `2k + s`.
///
/// With a full SVD `M = U~ Sigma V~^T` of numerical rank `r`, take
/// `U = [U~_r J_r, U~_rest]`, `V = V~`; the leading `r x r` block of `M'` is
/// then the anti-diagonal `J_r Sigma_r`, which meets the lower-right corner in
/// only `max(r - 2k, 0)` entries. Singular values below the rank threshold
/// stay on the trailing diagonal so that the factorisation is exact.
pub fn rotate_to_low_rank_corner(m: &Matrix, k: usize, s: usize) -> Result<CornerRotation> {
    let (rows, cols) = m.shape();
    if k == 0 || rows < k || cols < k {
        return Err(Error::InvalidParams(format!(
            "require 1 <= k <= min(rows, cols), got k={k} for {rows}x{cols}"
        )));
    }
    let f = svd_full(m)?;
    let scale = f.sigma.first().copied().unwrap_or(0.0);
    let cut = rank_threshold(scale, DEFAULT_RANK_TOL, 0.0);
    let r = if scale > 0.0 {
        f.sigma.iter().filter(|&&x| x > cut).count()
    } else {
        0
    };
    if r > 2 * k + s {
        return Err(Error::RankTooHigh {
            rank: r,
            bound: 2 * k + s,
        });
    }
    let mut u = f.u.clone();
    let lead = sub(&f.u, 0, 0, rows, r) * reversal(r);
    u.view_mut((0, 0), (rows, r)).copy_from(&lead);
    let v = f.v.clone();

    let mut m_prime = diag_rect(rows, cols, &f.sigma);
    let corner = reversal(r) * diag_rect(r, r, &f.sigma[..r]);
    m_prime.view_mut((0, 0), (r, r)).copy_from(&corner);
    Ok(CornerRotation {
        u,
        v,
        m_prime,
        rank: r,
        scale,
    })
}
