//! Matrix sequences converging to a point of the variety, and frames that
//! follow them.
//!
//! A [`SequenceBundle`] stores `X_0, ..., X_{N-1}` together with a target `X`
//! and per-index frames
//!
//! ```text
//! [U_i  Ubar_i  U_perp_i]   (m x m)      [V_i  Vbar_i  V_perp_i]   (n x n)
//!   r_low  r_seq-r_low  m-r_seq            r_low  r_seq-r_low  n-r_seq
//! ```
//!
//! where `[U_i Ubar_i]` spans `im X_i`. Constant-rank bundles have
//! `r_low = r_seq` and empty `Ubar_i`. Frames built by projection are full
//! rank but not necessarily orthonormal.

use crate::cones::{cone_frame, cone_membership, decompose, ConeFrame, ConeSpec};
use crate::matcore::{
    block2x2, columns, diag, format_matrix, hcat, haar_orthogonal, householder_qr,
    orth_complement, projector, read_matrix, svd, Matrix, RandomSource,
};
use crate::variety::numerical_rank;
use crate::{Error, Result, DEFAULT_RANK_TOL};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Radius used to group projector pairs into one convergent subsequence.
pub const CLUSTER_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Explicit,
    ConstantRankAlignment,
    DecreasingRankSplit,
    DenseCluster,
    PlantedCluster,
    PlantedFrame,
    ConstantRank,
    RandomRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexFrames {
    pub u: Matrix,
    pub u_bar: Matrix,
    pub u_perp: Matrix,
    pub v: Matrix,
    pub v_bar: Matrix,
    pub v_perp: Matrix,
}

impl IndexFrames {
    pub fn left(&self) -> Matrix {
        hcat(self.u.nrows(), &[&self.u, &self.u_bar, &self.u_perp])
    }

    pub fn right(&self) -> Matrix {
        hcat(self.v.nrows(), &[&self.v, &self.v_bar, &self.v_perp])
    }

    /// `[Ubar_i U_perp_i]`, the part of the left frame outside `U_i`.
    pub fn left_complement(&self) -> Matrix {
        hcat(self.u.nrows(), &[&self.u_bar, &self.u_perp])
    }

    pub fn right_complement(&self) -> Matrix {
        hcat(self.v.nrows(), &[&self.v_bar, &self.v_perp])
    }

    fn split(left: &Matrix, right: &Matrix, r_low: usize, r_seq: usize) -> Self {
        let (m, n) = (left.nrows(), right.nrows());
        IndexFrames {
            u: columns(left, 0, r_low),
            u_bar: columns(left, r_low, r_seq - r_low),
            u_perp: columns(left, r_seq, m - r_seq),
            v: columns(right, 0, r_low),
            v_bar: columns(right, r_low, r_seq - r_low),
            v_perp: columns(right, r_seq, n - r_seq),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceBundle {
    pub x_seq: Vec<Matrix>,
    pub target: Matrix,
    pub r_low: usize,
    pub r_seq: usize,
    pub frames: Vec<IndexFrames>,
    /// Indices along which the frames converge (decreasing-rank splitting).
    pub subsequence: Option<Vec<usize>>,
    /// Limits of `Ubar_{i_k}` and `Vbar_{i_k}` along `subsequence`.
    pub limit_u_bar: Option<Matrix>,
    pub limit_v_bar: Option<Matrix>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl SequenceBundle {
    pub fn len(&self) -> usize {
        self.x_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_seq.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.target.nrows()
    }

    pub fn cols(&self) -> usize {
        self.target.ncols()
    }

    pub fn target_frame(&self) -> Result<ConeFrame> {
        target_frame(&self.target, self.r_low)
    }

    /// `|X_i - X|` per index.
    pub fn distances(&self) -> Vec<f64> {
        self.x_seq.iter().map(|x| (x - &self.target).norm()).collect()
    }

    /// Largest span residual of the frames at index `i`:
    /// `[U_i Ubar_i]` inside `im X_i`, `U_perp_i` orthogonal to it, and the
    /// same on the row side.
    pub fn span_residual(&self, i: usize) -> Result<f64> {
        let f = &self.frames[i];
        let x = &self.x_seq[i];
        let s = svd(x)?;
        let k = self.r_seq;
        let pc = projector(&columns(&s.u, 0, k));
        let pr = projector(&columns(&s.v, 0, k));
        let inside = hcat(self.rows(), &[&f.u, &f.u_bar]);
        let inside_r = hcat(self.cols(), &[&f.v, &f.v_bar]);
        let res = [
            rel(&(&inside - &pc * &inside), &inside),
            rel(&(&pc * &f.u_perp), &f.u_perp),
            rel(&(&inside_r - &pr * &inside_r), &inside_r),
            rel(&(&pr * &f.v_perp), &f.v_perp),
        ];
        Ok(res.into_iter().fold(0.0, f64::max))
    }
}

fn rel(a: &Matrix, scale: &Matrix) -> f64 {
    a.norm() / scale.norm().max(1.0)
}

/// SVD frame of `x` at a prescribed rank.
pub fn target_frame(x: &Matrix, rank: usize) -> Result<ConeFrame> {
    let f = cone_frame(x, DEFAULT_RANK_TOL)?;
    if f.r != rank {
        return Err(Error::RankMismatch {
            index: 0,
            expected: rank,
            found: f.r,
        });
    }
    Ok(f)
}

/// Random point of `R_rank` with singular values `1 + 0.5 j + 0.1 u_j`
/// (`j = rank-1, ..., 0`), so consecutive gaps are at least 0.4.
pub fn random_point(m: usize, n: usize, rank: usize, rng: &mut RandomSource) -> Matrix {
    let u = columns(&haar_orthogonal(m, rng), 0, rank);
    let v = columns(&haar_orthogonal(n, rng), 0, rank);
    let sigma: Vec<f64> = (0..rank)
        .map(|j| 1.0 + 0.5 * (rank - 1 - j) as f64 + 0.1 * rng.uniform())
        .collect();
    u * diag(&sigma) * v.transpose()
}

/// Column and row projectors of the leading `rank` singular directions.
fn leading_projectors(x: &Matrix, rank: usize) -> Result<(Matrix, Matrix, crate::SvdFactors)> {
    let s = svd(x)?;
    let pc = projector(&columns(&s.u, 0, rank));
    let pr = projector(&columns(&s.v, 0, rank));
    Ok((pc, pr, s))
}

/// Frames of a rank-`r` matrix obtained by projecting the target frames
/// onto its column/row spaces and their complements:
/// `U_i = P U`, `U_perp_i = (I - P) U_perp`, likewise for `V`.
///
/// When a projected basis leaves the unit ball around its source (early
/// indices far from the target), the SVD frame of the matrix is used.
fn projected_frames(
    pc: &Matrix,
    pr: &Matrix,
    s: &crate::SvdFactors,
    rank: usize,
    target: &ConeFrame,
) -> Result<(IndexFrames, bool)> {
    let (m, n) = (pc.nrows(), pr.nrows());
    let u = pc * &target.u;
    let u_perp = (Matrix::identity(m, m) - pc) * &target.u_perp;
    let v = pr * &target.v;
    let v_perp = (Matrix::identity(n, n) - pr) * &target.v_perp;
    let near = (&u - &target.u).norm() < 1.0
        && (&u_perp - &target.u_perp).norm() < 1.0
        && (&v - &target.v).norm() < 1.0
        && (&v_perp - &target.v_perp).norm() < 1.0;
    if near {
        return Ok((
            IndexFrames {
                u,
                u_bar: Matrix::zeros(m, 0),
                u_perp,
                v,
                v_bar: Matrix::zeros(n, 0),
                v_perp,
            },
            false,
        ));
    }
    let uu = columns(&s.u, 0, rank);
    let vv = columns(&s.v, 0, rank);
    Ok((
        IndexFrames {
            u_perp: orth_complement(&uu)?,
            v_perp: orth_complement(&vv)?,
            u: uu,
            u_bar: Matrix::zeros(m, 0),
            v: vv,
            v_bar: Matrix::zeros(n, 0),
        },
        true,
    ))
}

fn check_ranks(x_seq: &[Matrix], expected: usize) -> Result<()> {
    for (i, x) in x_seq.iter().enumerate() {
        let found = numerical_rank(x, DEFAULT_RANK_TOL);
        if found != expected {
            return Err(Error::RankMismatch {
                index: i,
                expected,
                found,
            });
        }
    }
    Ok(())
}

fn check_shapes(x: &Matrix, x_seq: &[Matrix]) -> Result<()> {
    for (i, xi) in x_seq.iter().enumerate() {
        if xi.shape() != x.shape() {
            return Err(Error::InvalidInput(format!(
                "sequence element {i} is {}x{}, target is {}x{}",
                xi.nrows(),
                xi.ncols(),
                x.nrows(),
                x.ncols()
            )));
        }
    }
    Ok(())
}

/// Frames along a constant-rank sequence converging to `x`.
pub fn align_frames_constant_rank(x: &Matrix, x_seq: &[Matrix]) -> Result<SequenceBundle> {
    check_shapes(x, x_seq)?;
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    let r = tf.r;
    check_ranks(x_seq, r)?;
    let frames = x_seq
        .iter()
        .map(|xi| {
            let (pc, pr, s) = leading_projectors(xi, r)?;
            Ok(projected_frames(&pc, &pr, &s, r, &tf)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SequenceBundle {
        x_seq: x_seq.to_vec(),
        target: x.clone(),
        r_low: r,
        r_seq: r,
        frames,
        subsequence: None,
        limit_u_bar: None,
        limit_v_bar: None,
        provenance: Provenance::ConstantRankAlignment,
        seed: None,
    })
}

/// `X_i = Xlow_i + Xtilde_i` with `Xlow_i` the best rank-`r_low`
/// approximation.
#[derive(Debug, Clone)]
pub struct RankSplit {
    pub low: Matrix,
    pub tilde: Matrix,
    /// Projector onto `im Xtilde_i`.
    pub tilde_col: Matrix,
    /// Projector onto `im Xtilde_i^T`.
    pub tilde_row: Matrix,
    pub low_col: Matrix,
    pub low_row: Matrix,
}

pub fn split_decreasing_rank(xi: &Matrix, r_low: usize, r: usize) -> Result<RankSplit> {
    let s = svd(xi)?;
    let mut low = Matrix::zeros(xi.nrows(), xi.ncols());
    for j in 0..r_low {
        low += s.sigma[j] * (s.u.column(j) * s.v.column(j).transpose());
    }
    let tilde = xi - &low;
    Ok(RankSplit {
        tilde_col: projector(&columns(&s.u, r_low, r - r_low)),
        tilde_row: projector(&columns(&s.v, r_low, r - r_low)),
        low_col: projector(&columns(&s.u, 0, r_low)),
        low_row: projector(&columns(&s.v, 0, r_low)),
        low,
        tilde,
    })
}

fn pair_distance(a: &RankSplit, b: &RankSplit) -> f64 {
    ((&a.tilde_col - &b.tilde_col).norm_squared() + (&a.tilde_row - &b.tilde_row).norm_squared())
        .sqrt()
}

/// Greedy convergent-subsequence search over projector pairs.
///
/// The final pair is tried first as cluster center; otherwise the center with
/// the most pairs within `radius` wins, later centers breaking ties.
fn projector_subsequence(splits: &[RankSplit], radius: f64) -> Result<(usize, Vec<usize>)> {
    let members = |c: usize| -> Vec<usize> {
        (0..splits.len())
            .filter(|&i| pair_distance(&splits[i], &splits[c]) <= radius)
            .collect()
    };
    let last = splits.len() - 1;
    let tail = members(last);
    if tail.len() >= 2 || splits.len() == 1 {
        return Ok((last, tail));
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for c in (0..splits.len()).rev() {
        let mem = members(c);
        if best.as_ref().is_none_or(|(_, b)| mem.len() > b.len()) {
            best = Some((c, mem));
        }
    }
    match best {
        Some((c, mem)) if mem.len() >= 2 => Ok((c, mem)),
        _ => Err(Error::NoConvergentSubsequence { tol: radius }),
    }
}

/// Leading `k` eigenvectors of a projector.
fn projector_basis(p: &Matrix, k: usize) -> Result<Matrix> {
    Ok(columns(&svd(p)?.u, 0, k))
}

/// Splitting and frame alignment along a sequence of rank `r` matrices
/// converging to `x` of smaller rank.
pub fn split_and_align_decreasing_rank(x: &Matrix, x_seq: &[Matrix]) -> Result<SequenceBundle> {
    check_shapes(x, x_seq)?;
    if x_seq.is_empty() {
        return Err(Error::InvalidInput("empty sequence".into()));
    }
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    let r_low = tf.r;
    let r = numerical_rank(&x_seq[0], DEFAULT_RANK_TOL);
    check_ranks(x_seq, r)?;
    if r <= r_low {
        return Err(Error::RankMismatch {
            index: 0,
            expected: r_low + 1,
            found: r,
        });
    }
    let (m, n) = x.shape();
    let splits = x_seq
        .iter()
        .map(|xi| split_decreasing_rank(xi, r_low, r))
        .collect::<Result<Vec<_>>>()?;
    let (center, subseq) = projector_subsequence(&splits, CLUSTER_RADIUS)?;

    let k = r - r_low;
    let u_bar_lim = projector_basis(&splits[center].tilde_col, k)?;
    let v_bar_lim = projector_basis(&splits[center].tilde_row, k)?;
    let u_perp_lim = orth_complement(&hcat(m, &[&tf.u, &u_bar_lim]))?;
    let v_perp_lim = orth_complement(&hcat(n, &[&tf.v, &v_bar_lim]))?;
    let in_subseq = {
        let mut mark = vec![false; x_seq.len()];
        for &i in &subseq {
            mark[i] = true;
        }
        mark
    };

    let mut frames = Vec::with_capacity(x_seq.len());
    for (i, (xi, sp)) in x_seq.iter().zip(&splits).enumerate() {
        let s_low = svd(&sp.low)?;
        let (low_frames, _) = projected_frames(&sp.low_col, &sp.low_row, &s_low, r_low, &tf)?;
        let s = svd(xi)?;
        let svd_bar_u = columns(&s.u, r_low, k);
        let svd_bar_v = columns(&s.v, r_low, k);
        let mut u_bar = svd_bar_u.clone();
        let mut v_bar = svd_bar_v.clone();
        let mut u_perp = orth_complement(&columns(&s.u, 0, r))?;
        let mut v_perp = orth_complement(&columns(&s.v, 0, r))?;
        if in_subseq[i] {
            let pu = &sp.tilde_col * &u_bar_lim;
            let pv = &sp.tilde_row * &v_bar_lim;
            if (&pu - &u_bar_lim).norm() < 1.0 && (&pv - &v_bar_lim).norm() < 1.0 {
                u_bar = pu;
                v_bar = pv;
            }
            let qu = (Matrix::identity(m, m) - &sp.low_col - &sp.tilde_col) * &u_perp_lim;
            let qv = (Matrix::identity(n, n) - &sp.low_row - &sp.tilde_row) * &v_perp_lim;
            if (&qu - &u_perp_lim).norm() < 1.0 && (&qv - &v_perp_lim).norm() < 1.0 {
                u_perp = qu;
                v_perp = qv;
            }
        }
        frames.push(IndexFrames {
            u: low_frames.u,
            u_bar,
            u_perp,
            v: low_frames.v,
            v_bar,
            v_perp,
        });
    }
    Ok(SequenceBundle {
        x_seq: x_seq.to_vec(),
        target: x.clone(),
        r_low,
        r_seq: r,
        frames,
        subsequence: Some(subseq),
        limit_u_bar: Some(u_bar_lim),
        limit_v_bar: Some(v_bar_lim),
        provenance: Provenance::DecreasingRankSplit,
        seed: None,
    })
}

fn budget_check(x: &Matrix, r_low: usize, r: usize) -> Result<()> {
    let budget = x.nrows().min(x.ncols()) - r_low;
    if r < r_low {
        return Err(Error::InvalidParams(format!(
            "sequence rank {r} below target rank {r_low}"
        )));
    }
    if r - r_low > budget {
        return Err(Error::BudgetExceeded {
            increment: r - r_low,
            budget,
        });
    }
    Ok(())
}

/// Bundle `X_i = X + sigma_min(X)/(i+1) Ubar_i Vbar_i^T` where the
/// complement frames `[Ubar_i U_perp_i] = U_perp P_i`,
/// `[Vbar_i V_perp_i] = V_perp Q_i` come from `frame_at(i)`.
fn perturbation_bundle(
    x: &Matrix,
    r: usize,
    n_len: usize,
    provenance: Provenance,
    seed: Option<u64>,
    mut frame_at: impl FnMut(usize) -> (Matrix, Matrix),
) -> Result<SequenceBundle> {
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    let r_low = tf.r;
    budget_check(x, r_low, r)?;
    if r_low == 0 {
        return Err(Error::InvalidParams("target must have rank >= 1".into()));
    }
    let sigma_low = tf.sigma[r_low - 1];
    let k = r - r_low;
    let mut x_seq = Vec::with_capacity(n_len);
    let mut frames = Vec::with_capacity(n_len);
    for i in 0..n_len {
        let (p, q) = frame_at(i);
        let left = &tf.u_perp * p;
        let right = &tf.v_perp * q;
        let u_bar = columns(&left, 0, k);
        let v_bar = columns(&right, 0, k);
        let t = sigma_low / (i as f64 + 1.0);
        x_seq.push(x + t * (&u_bar * v_bar.transpose()));
        frames.push(IndexFrames {
            u: tf.u.clone(),
            u_perp: columns(&left, k, left.ncols() - k),
            v: tf.v.clone(),
            v_perp: columns(&right, k, right.ncols() - k),
            u_bar,
            v_bar,
        });
    }
    Ok(SequenceBundle {
        x_seq,
        target: x.clone(),
        r_low,
        r_seq: r,
        frames,
        subsequence: None,
        limit_u_bar: None,
        limit_v_bar: None,
        provenance,
        seed,
    })
}

/// Sequence of rank `r` converging to `x` whose complement frames are i.i.d.
/// Haar draws, one derived stream per index.
pub fn dense_cluster_sequence(
    x: &Matrix,
    r: usize,
    n_len: usize,
    rng: &RandomSource,
) -> Result<SequenceBundle> {
    let (m, n) = x.shape();
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    let (pm, pn) = (m - tf.r, n - tf.r);
    perturbation_bundle(x, r, n_len, Provenance::DenseCluster, Some(rng.seed()), |i| {
        let mut s = rng.derive(i as u64);
        (haar_orthogonal(pm, &mut s), haar_orthogonal(pn, &mut s))
    })
}

/// Orthogonal factor of `I + eps G`, with `diag(R) > 0`.
fn near_identity(eps: f64, g: &Matrix) -> Matrix {
    let n = g.nrows();
    let (mut q, r) = householder_qr(&(Matrix::identity(n, n) + eps * g));
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Like [`dense_cluster_sequence`], but with prescribed complement rotations
/// `(P*, Q*)` planted as cluster points.
///
/// Indices are dealt round-robin over `targets.len() + 1` classes. The `k`-th
/// index of class `c < targets.len()` uses `P*_c Q(0.25^k)` where `Q(eps)` is
/// the orthogonal factor of `I + eps G` for a fresh Gaussian `G`; the last
/// class uses i.i.d. Haar draws.
pub fn planted_cluster_sequence(
    x: &Matrix,
    r: usize,
    n_len: usize,
    targets: &[(Matrix, Matrix)],
    rng: &RandomSource,
) -> Result<SequenceBundle> {
    let (m, n) = x.shape();
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    let (pm, pn) = (m - tf.r, n - tf.r);
    for (p, q) in targets {
        if p.shape() != (pm, pm) || q.shape() != (pn, pn) {
            return Err(Error::InvalidInput(format!(
                "planted rotations must be {pm}x{pm} and {pn}x{pn}"
            )));
        }
    }
    let classes = targets.len() + 1;
    perturbation_bundle(x, r, n_len, Provenance::PlantedCluster, Some(rng.seed()), |i| {
        let mut s = rng.derive(i as u64);
        let c = i % classes;
        if c == targets.len() {
            return (haar_orthogonal(pm, &mut s), haar_orthogonal(pn, &mut s));
        }
        let eps = 0.25f64.powi((i / classes) as i32);
        let gu = s.gaussian(pm, pm);
        let gv = s.gaussian(pn, pn);
        (
            &targets[c].0 * near_identity(eps, &gu),
            &targets[c].1 * near_identity(eps, &gv),
        )
    })
}

/// One Haar draw reused at every index: the complement frames are constant.
pub fn planted_frame_sequence(
    x: &Matrix,
    r: usize,
    n_len: usize,
    rng: &RandomSource,
) -> Result<SequenceBundle> {
    let (m, n) = x.shape();
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    let mut s = rng.derive(0);
    let p = haar_orthogonal(m - tf.r, &mut s);
    let q = haar_orthogonal(n - tf.r, &mut s);
    perturbation_bundle(x, r, n_len, Provenance::PlantedFrame, Some(rng.seed()), |_| {
        (p.clone(), q.clone())
    })
}

/// Constant-rank sequence `X_i = trunc_r(X + t_i G)` converging to `x`
/// (rank `r`) along one unit Gaussian direction `G`, with
/// `t_i = sigma_r(X) 0.9^i / 2`.
pub fn constant_rank_sequence(x: &Matrix, n_len: usize, rng: &RandomSource) -> Result<SequenceBundle> {
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    if tf.r == 0 {
        return Err(Error::InvalidParams("target must have rank >= 1".into()));
    }
    let step = 0.5 * tf.sigma[tf.r - 1];
    let (m, n) = x.shape();
    let g = rng.derive(0).gaussian(m, n);
    let g = &g / g.norm();
    let x_seq = (0..n_len)
        .map(|i| crate::variety::truncate_rank(&(x + step * 0.9f64.powi(i as i32) * &g), tf.r))
        .collect::<Result<Vec<_>>>()?;
    let mut b = align_frames_constant_rank(x, &x_seq)?;
    b.provenance = Provenance::ConstantRank;
    b.seed = Some(rng.seed());
    Ok(b)
}

/// Generic rank-`r` sequence converging to `x` of rank `r_low < r`; the
/// `r - r_low` extra directions are unstructured.
pub fn random_rank_sequence(
    x: &Matrix,
    r: usize,
    n_len: usize,
    rng: &RandomSource,
) -> Result<SequenceBundle> {
    let tf = cone_frame(x, DEFAULT_RANK_TOL)?;
    budget_check(x, tf.r, r)?;
    if tf.r == 0 || r == tf.r {
        return Err(Error::InvalidParams(
            "random rank sequences need 1 <= rank X < r".into(),
        ));
    }
    let step = tf.sigma[tf.r - 1];
    let (m, n) = x.shape();
    let x_seq = (0..n_len)
        .map(|i| {
            let mut s = rng.derive(i as u64);
            let g = s.gaussian_rank(m, n, r - tf.r);
            let g = &g / g.norm();
            let t = step / (i as f64 + 2.0);
            x + t * g
        })
        .collect::<Vec<_>>();
    let frames = x_seq
        .iter()
        .map(|xi| {
            let sp = split_decreasing_rank(xi, tf.r, r)?;
            let s_low = svd(&sp.low)?;
            let (f, _) = projected_frames(&sp.low_col, &sp.low_row, &s_low, tf.r, &tf)?;
            let s = svd(xi)?;
            Ok(IndexFrames {
                u_bar: columns(&s.u, tf.r, r - tf.r),
                v_bar: columns(&s.v, tf.r, r - tf.r),
                u_perp: orth_complement(&columns(&s.u, 0, r))?,
                v_perp: orth_complement(&columns(&s.v, 0, r))?,
                ..f
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SequenceBundle {
        x_seq,
        target: x.clone(),
        r_low: tf.r,
        r_seq: r,
        frames,
        subsequence: None,
        limit_u_bar: None,
        limit_v_bar: None,
        provenance: Provenance::RandomRank,
        seed: Some(rng.seed()),
    })
}

/// A target tangent vector and per-index tangent vectors approaching it.
#[derive(Debug, Clone)]
pub struct LiftedVectorSequence {
    pub eta: Matrix,
    pub eta_seq: Vec<Matrix>,
}

impl LiftedVectorSequence {
    pub fn residuals(&self) -> Vec<f64> {
        self.eta_seq.iter().map(|e| (e - &self.eta).norm()).collect()
    }

    /// Tangent-cone membership of each `eta_i` at `X_i`.
    pub fn memberships(&self, bundle: &SequenceBundle, rbar: usize, tol: f64) -> Result<Vec<bool>> {
        bundle
            .x_seq
            .iter()
            .zip(&self.eta_seq)
            .map(|(xi, ei)| {
                let f = cone_frame(xi, DEFAULT_RANK_TOL)?;
                cone_membership(&f, &ConeSpec::tangent(rbar), ei, tol)
            })
            .collect()
    }
}

/// Lifts `eta`, a member of the tangent cone of `R_{<= rbar - r + r_low}` at
/// the target, to tangent vectors of `R_{<= rbar}` at every `X_i`:
/// `eta_i = [U_i U_perp_i] [A B; C D] [V_i V_perp_i]^T` with frames
/// projected onto the best rank-`r_low` approximations of `X_i`.
pub fn lift_tangent_vector(bundle: &SequenceBundle, rbar: usize, eta: &Matrix) -> Result<LiftedVectorSequence> {
    let tf = bundle.target_frame()?;
    let (r_low, r) = (bundle.r_low, bundle.r_seq);
    if rbar < r {
        return Err(Error::InvalidParams(format!(
            "require r <= rbar, got r={r}, rbar={rbar}"
        )));
    }
    let lower = ConeSpec::tangent(rbar - r + r_low);
    if !cone_membership(&tf, &lower, eta, 1e-8)? {
        return Err(Error::NotInCone(format!(
            "eta is not in the tangent cone of rank <= {} at the target",
            lower.rbar
        )));
    }
    let blocks = decompose(&tf, eta)?;
    let core = block2x2(&blocks.a, &blocks.b, &blocks.c, &blocks.d);
    let (m, n) = (bundle.rows(), bundle.cols());
    let eta_seq = bundle
        .x_seq
        .iter()
        .map(|xi| {
            let rank_i = numerical_rank(xi, DEFAULT_RANK_TOL);
            let sp = split_decreasing_rank(xi, r_low, rank_i.max(r_low))?;
            let s_low = svd(&sp.low)?;
            let (f, _) = projected_frames(&sp.low_col, &sp.low_row, &s_low, r_low, &tf)?;
            let left = hcat(m, &[&f.u, &f.u_perp]);
            let right = hcat(n, &[&f.v, &f.v_perp]);
            Ok(left * &core * right.transpose())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LiftedVectorSequence {
        eta: eta.clone(),
        eta_seq,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    m: usize,
    n: usize,
    r_low: usize,
    r_seq: usize,
    len: usize,
    provenance: Provenance,
    seed: Option<u64>,
    target: String,
    elements: Vec<ElementFiles>,
    subsequence: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ElementFiles {
    x: String,
    left_frame: String,
    right_frame: String,
}

/// Writes `manifest.json` plus one matrix file per element and frame.
pub fn save_bundle(bundle: &SequenceBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let width = bundle.len().max(1).to_string().len().max(3);
    let mut elements = Vec::with_capacity(bundle.len());
    for (i, (x, f)) in bundle.x_seq.iter().zip(&bundle.frames).enumerate() {
        let e = ElementFiles {
            x: format!("x_{i:0width$}.txt"),
            left_frame: format!("left_{i:0width$}.txt"),
            right_frame: format!("right_{i:0width$}.txt"),
        };
        std::fs::write(dir.join(&e.x), format_matrix(x))?;
        std::fs::write(dir.join(&e.left_frame), format_matrix(&f.left()))?;
        std::fs::write(dir.join(&e.right_frame), format_matrix(&f.right()))?;
        elements.push(e);
    }
    std::fs::write(dir.join("target.txt"), format_matrix(&bundle.target))?;
    let manifest = Manifest {
        m: bundle.rows(),
        n: bundle.cols(),
        r_low: bundle.r_low,
        r_seq: bundle.r_seq,
        len: bundle.len(),
        provenance: bundle.provenance,
        seed: bundle.seed,
        target: "target.txt".into(),
        elements,
        subsequence: bundle.subsequence.clone(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<SequenceBundle> {
    let read = |name: &str| read_matrix(&dir.join(name));
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", manifest_path.display())))
    })?;
    let mf: Manifest = serde_json::from_str(&text)?;
    let target = read(&mf.target)?;
    let mut x_seq = Vec::with_capacity(mf.len);
    let mut frames = Vec::with_capacity(mf.len);
    for e in &mf.elements {
        x_seq.push(read(&e.x)?);
        let left = read(&e.left_frame)?;
        let right = read(&e.right_frame)?;
        frames.push(IndexFrames::split(&left, &right, mf.r_low, mf.r_seq));
    }
    Ok(SequenceBundle {
        x_seq,
        target,
        r_low: mf.r_low,
        r_seq: mf.r_seq,
        frames,
        subsequence: mf.subsequence,
        limit_u_bar: None,
        limit_v_bar: None,
        provenance: mf.provenance,
        seed: mf.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag_rect, orthonormality_residual};

    fn e(n: usize, i: usize) -> Matrix {
        let mut v = Matrix::zeros(n, 1);
        v[(i, 0)] = 1.0;
        v
    }

    #[test]
    fn constant_sequence_keeps_frames() {
        let mut rng = RandomSource::new(1);
        let x = random_point(4, 5, 2, &mut rng);
        let b = align_frames_constant_rank(&x, &[x.clone(), x.clone(), x.clone()]).unwrap();
        let tf = b.target_frame().unwrap();
        for f in &b.frames {
            assert!((&f.u - &tf.u).norm() < 1e-12);
            assert!((&f.v_perp - &tf.v_perp).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_rank_frames_converge_geometrically() {
        let x = diag(&[2.0, 1.0, 0.0]);
        let seq: Vec<Matrix> = (0..30)
            .map(|i| &x + 0.5f64.powi(i) * (e(3, 0) * e(3, 2).transpose()))
            .collect();
        let b = align_frames_constant_rank(&x, &seq).unwrap();
        let tf = b.target_frame().unwrap();
        for (i, f) in b.frames.iter().enumerate().skip(2) {
            let res = (&f.u - &tf.u).norm() + (&f.v - &tf.v).norm();
            assert!(res <= 4.0 * 0.5f64.powi(i as i32), "index {i}: {res}");
        }
    }

    #[test]
    fn constant_rank_span_residuals_seed_13() {
        let rng = RandomSource::new(13);
        let x = random_point(5, 4, 2, &mut rng.derive(99));
        let b = constant_rank_sequence(&x, 40, &rng).unwrap();
        for i in 0..b.len() {
            assert!(b.span_residual(i).unwrap() <= 1e-8);
        }
        let last = b.len() - 1;
        let tf = b.target_frame().unwrap();
        let d = (&b.x_seq[last] - &x).norm();
        assert!((&b.frames[last].u - &tf.u).norm() <= 10.0 * d / tf.sigma[1]);
    }

    #[test]
    fn rank_mismatch_is_reported() {
        let x = diag(&[2.0, 1.0, 0.0]);
        let err = align_frames_constant_rank(&x, &[x.clone(), diag(&[1.0, 1.0, 1.0])]);
        assert!(matches!(
            err,
            Err(Error::RankMismatch {
                index: 1,
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn split_on_diagonal_family() {
        let x = diag(&[1.0, 0.0, 0.0]);
        let seq: Vec<Matrix> = (0..20)
            .map(|i| diag(&[1.0, 1.0 / (i as f64 + 1.0), 0.0]))
            .collect();
        let b = split_and_align_decreasing_rank(&x, &seq).unwrap();
        assert_eq!(b.subsequence.as_ref().unwrap().len(), 20);
        let ub = b.limit_u_bar.as_ref().unwrap();
        assert!((ub[(1, 0)].abs() - 1.0).abs() < 1e-12);
        for (i, xi) in seq.iter().enumerate().skip(1) {
            let sp = split_decreasing_rank(xi, 1, 2).unwrap();
            assert!((&sp.low - &x).norm() < 1e-12);
            assert!((&sp.tilde - diag(&[0.0, 1.0 / (i as f64 + 1.0), 0.0])).norm() < 1e-12);
        }
    }

    #[test]
    fn split_with_fixed_perturbation_direction() {
        let mut rng = RandomSource::new(3);
        let x = random_point(5, 5, 2, &mut rng);
        let tf = cone_frame(&x, 1e-9).unwrap();
        let ub = tf.u_perp.column(0).into_owned();
        let vb = tf.v_perp.column(1).into_owned();
        let seq: Vec<Matrix> = (0..15)
            .map(|i| &x + (1.0 / (i as f64 + 2.0)) * (&ub * vb.transpose()))
            .collect();
        let b = split_and_align_decreasing_rank(&x, &seq).unwrap();
        let lim = b.limit_u_bar.as_ref().unwrap();
        assert!((projector(lim) - &ub * ub.transpose()).norm() < 1e-8);
        for i in 0..b.len() {
            let sp = split_decreasing_rank(&b.x_seq[i], 2, 3).unwrap();
            assert!((sp.low.transpose() * &sp.tilde).norm() <= 1e-8 * b.x_seq[i].norm());
            assert!(b.span_residual(i).unwrap() <= 1e-8);
        }
        assert!((lim.transpose() * &x).norm() < 1e-8);
    }

    #[test]
    fn dense_bundle_basic_properties() {
        let mut rng = RandomSource::new(2);
        let x = random_point(4, 4, 1, &mut rng);
        let sigma = cone_frame(&x, 1e-9).unwrap().sigma[0];
        let b = dense_cluster_sequence(&x, 2, 1, &RandomSource::new(5)).unwrap();
        assert_eq!(numerical_rank(&b.x_seq[0], 1e-9), 2);
        assert!(((&b.x_seq[0] - &x).norm() - sigma).abs() < 1e-12);

        let b = dense_cluster_sequence(&x, 3, 30, &RandomSource::new(6)).unwrap();
        for (i, xi) in b.x_seq.iter().enumerate() {
            let dx = xi - &x;
            assert!((x.transpose() * &dx).norm() <= 1e-10);
            assert!((&dx * x.transpose()).norm() <= 1e-10);
            assert_eq!(numerical_rank(xi, 1e-9), 3);
            assert!((dx.norm() - sigma * 2f64.sqrt() / (i as f64 + 1.0)).abs() < 1e-10);
            assert!(orthonormality_residual(&b.frames[i].left()) < 1e-10);
        }
        let d = b.distances();
        assert!(d.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn dense_bundle_budget() {
        let x = diag(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            dense_cluster_sequence(&x, 4, 3, &RandomSource::new(0)),
            Err(Error::BudgetExceeded {
                increment: 3,
                budget: 2
            })
        ));
    }

    #[test]
    fn dense_bundle_is_index_deterministic() {
        let x = diag(&[1.0, 0.0, 0.0, 0.0]);
        let a = dense_cluster_sequence(&x, 2, 10, &RandomSource::new(4)).unwrap();
        let b = dense_cluster_sequence(&x, 2, 20, &RandomSource::new(4)).unwrap();
        for i in 0..10 {
            assert_eq!(a.x_seq[i], b.x_seq[i]);
        }
    }

    #[test]
    fn split_recovers_planted_frames() {
        let mut rng = RandomSource::new(8);
        let x = random_point(4, 5, 1, &mut rng);
        let b = dense_cluster_sequence(&x, 2, 25, &RandomSource::new(9)).unwrap();
        // index 0 has sigma_min(X) tied with the perturbation and is skipped
        for i in 1..b.len() {
            let sp = split_decreasing_rank(&b.x_seq[i], 1, 2).unwrap();
            let planted = projector(&b.frames[i].u_bar);
            assert!((&sp.tilde_col - planted).norm() <= 1e-8, "index {i}");
            let planted_v = projector(&b.frames[i].v_bar);
            assert!((&sp.tilde_row - planted_v).norm() <= 1e-8, "index {i}");
        }
    }

    #[test]
    fn iid_bundle_has_no_convergent_projectors() {
        let mut rng = RandomSource::new(10);
        let x = random_point(4, 4, 1, &mut rng);
        let b = dense_cluster_sequence(&x, 2, 30, &RandomSource::new(11)).unwrap();
        assert!(matches!(
            split_and_align_decreasing_rank(&x, &b.x_seq),
            Err(Error::NoConvergentSubsequence { .. })
        ));
    }

    #[test]
    fn planted_bundle_clusters_at_targets() {
        let mut rng = RandomSource::new(12);
        let x = random_point(4, 4, 1, &mut rng);
        let p = haar_orthogonal(3, &mut rng);
        let q = haar_orthogonal(3, &mut rng);
        let b = planted_cluster_sequence(&x, 2, 100, &[(p.clone(), q)], &RandomSource::new(1))
            .unwrap();
        let tf = cone_frame(&x, 1e-9).unwrap();
        let target_left = &tf.u_perp * &p;
        let last = b.frames.iter().step_by(2).next_back().unwrap();
        assert!((last.left_complement() - &target_left).norm() < 1e-8);
        let sb = split_and_align_decreasing_rank(&x, &b.x_seq).unwrap();
        assert!(sb.subsequence.unwrap().len() >= 10);
        let ub = columns(&target_left, 0, 1);
        assert!((projector(sb.limit_u_bar.as_ref().unwrap()) - projector(&ub)).norm() < 1e-6);
    }

    #[test]
    fn planted_frame_bundle_is_constant() {
        let x = diag_rect(4, 4, &[1.5]);
        let b = planted_frame_sequence(&x, 2, 10, &RandomSource::new(3)).unwrap();
        for f in &b.frames {
            assert_eq!(f.left(), b.frames[0].left());
        }
    }

    #[test]
    fn lift_examples() {
        let x = diag(&[1.0, 0.0, 0.0]);
        let seq: Vec<Matrix> = (0..40)
            .map(|i| diag(&[1.0, 1.0 / (i as f64 + 1.0), 0.0]))
            .collect();
        let b = split_and_align_decreasing_rank(&x, &seq).unwrap();
        let eta = e(3, 0) * e(3, 1).transpose();
        let lifted = lift_tangent_vector(&b, 2, &eta).unwrap();
        assert!(lifted.memberships(&b, 2, 1e-8).unwrap().into_iter().all(|ok| ok));
        for res in lifted.residuals() {
            assert!(res < 1e-12);
        }

        let zero = lift_tangent_vector(&b, 2, &Matrix::zeros(3, 3)).unwrap();
        assert!(zero.eta_seq.iter().all(|z| z.norm() == 0.0));

        let constant = align_frames_constant_rank(&x, &vec![x.clone(); 5]).unwrap();
        let mut rng = RandomSource::new(4);
        let tf = cone_frame(&x, 1e-9).unwrap();
        let eta = crate::cones::random_member(&tf, &ConeSpec::tangent(2), &mut rng).unwrap();
        let lifted = lift_tangent_vector(&constant, 2, &eta).unwrap();
        assert!(lifted.residuals().iter().all(|&r| r < 1e-12));

        let outside = diag(&[0.0, 1.0, 1.0]);
        assert!(matches!(
            lift_tangent_vector(&b, 2, &outside),
            Err(Error::NotInCone(_))
        ));
    }

    #[test]
    fn lift_along_dense_bundle() {
        let mut rng = RandomSource::new(14);
        let x = random_point(4, 4, 1, &mut rng);
        let b = dense_cluster_sequence(&x, 2, 50, &RandomSource::new(15)).unwrap();
        let tf = cone_frame(&x, 1e-9).unwrap();
        for _ in 0..5 {
            let eta =
                crate::cones::random_member(&tf, &ConeSpec::tangent(1), &mut rng).unwrap();
            let lifted = lift_tangent_vector(&b, 2, &eta).unwrap();
            assert!(lifted.memberships(&b, 2, 1e-8).unwrap().into_iter().all(|ok| ok));
            let res = lifted.residuals();
            let last = res.len() - 1;
            assert!(res[last] <= 10.0 * b.distances()[last] * eta.norm() / tf.sigma[0]);
        }
    }

    #[test]
    fn bundle_round_trip_on_disk() {
        let x = diag_rect(4, 3, &[2.0]);
        let b = dense_cluster_sequence(&x, 2, 4, &RandomSource::new(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&b, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        assert_eq!(back.x_seq, b.x_seq);
        assert_eq!(back.frames, b.frames);
        assert_eq!(back.provenance, Provenance::DenseCluster);
        assert_eq!(back.seed, Some(3));
    }
}
