use crate::cones::{cone_distance, cone_frame, cone_membership, random_member, ConeFrame, ConeKind, ConeSpec};
use crate::matcore::diag_rect;
use crate::seqlab::SequenceBundle;
use crate::{Matrix, RandomSource, Result, DEFAULT_RANK_TOL};

/// Additive slack of the inner certificate.
pub const INNER_TOL: f64 = 1e-6;
/// Relative distance accepted between a cluster candidate and a cone.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Largest pairwise distance inside one cluster.
pub const CLUSTER_RADIUS: f64 = 1e-4;
/// Fraction of the sequence searched for clusters.
pub const TAIL_FRACTION: f64 = 0.25;
/// A residual floor counts as bounded away from zero above this multiple of
/// `INNER_TOL`.
pub const FLOOR_FACTOR: f64 = 10.0;

/// SVD frames of every element of the bundle.
pub fn index_frames(bundle: &SequenceBundle) -> Result<Vec<ConeFrame>> {
    bundle
        .x_seq
        .iter()
        .map(|x| cone_frame(x, DEFAULT_RANK_TOL))
        .collect()
}

pub fn residual_profile(frames: &[ConeFrame], spec: &ConeSpec, probe: &Matrix) -> Result<Vec<f64>> {
    frames.iter().map(|f| cone_distance(f, spec, probe)).collect()
}

/// `d(probe, Cone(X_i))` for every index.
pub fn inner_residual_profile(bundle: &SequenceBundle, spec: &ConeSpec, probe: &Matrix) -> Result<Vec<f64>> {
    residual_profile(&index_frames(bundle)?, spec, probe)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerCertificate {
    pub certified: bool,
    /// Slope fitted on the first half.
    pub c_fit: f64,
    /// `max(residual_i - C d_i - tol)` over the second half.
    pub worst_excess: f64,
    /// Smallest residual over the second half.
    pub tail_floor: f64,
}

/// Fits `C = max (r_i - tol)_+ / d_i` on the first half of the sequence and
/// checks `r_i <= C d_i + tol` on the second half, where `d_i = |X_i - X|`.
pub fn certify_inner(residuals: &[f64], distances: &[f64], tol: f64) -> InnerCertificate {
    assert_eq!(residuals.len(), distances.len());
    let n = residuals.len();
    let half = n / 2;
    let mut c_fit: f64 = 0.0;
    for i in 0..half {
        let excess = (residuals[i] - tol).max(0.0);
        if excess > 0.0 {
            c_fit = c_fit.max(if distances[i] > 0.0 {
                excess / distances[i]
            } else {
                f64::INFINITY
            });
        }
    }
    let mut worst_excess = f64::NEG_INFINITY;
    let mut tail_floor = f64::INFINITY;
    for i in half..n {
        let bound = if distances[i] > 0.0 { c_fit * distances[i] } else { 0.0 };
        worst_excess = worst_excess.max(residuals[i] - bound - tol);
        tail_floor = tail_floor.min(residuals[i]);
    }
    InnerCertificate {
        certified: c_fit.is_finite() && worst_excess <= 0.0,
        c_fit,
        worst_excess,
        tail_floor,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCandidate {
    pub center: Matrix,
    pub members: Vec<usize>,
    /// Largest pairwise distance among members.
    pub spread: f64,
}

/// Groups of at least two tail elements with pairwise distances at most
/// `radius`, each summarised by its average. Centres are scanned from the
/// end of the sequence.
pub fn cluster_candidates(seq: &[Matrix], tail_fraction: f64, radius: f64) -> Vec<ClusterCandidate> {
    let n = seq.len();
    let tail_len = ((n as f64) * tail_fraction).ceil() as usize;
    let start = n - tail_len.min(n);
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for c in (start..n).rev() {
        if taken[c] {
            continue;
        }
        let members: Vec<usize> = (start..n)
            .filter(|&j| !taken[j] && (&seq[j] - &seq[c]).norm() <= 0.5 * radius)
            .collect();
        if members.len() < 2 {
            continue;
        }
        let mut spread: f64 = 0.0;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                spread = spread.max((&seq[i] - &seq[j]).norm());
            }
        }
        let mut center = Matrix::zeros(seq[c].nrows(), seq[c].ncols());
        for &j in &members {
            taken[j] = true;
            center += &seq[j];
        }
        center /= members.len() as f64;
        out.push(ClusterCandidate {
            center,
            members,
            spread,
        });
    }
    out
}

/// `left_i * coeff * right_i^T` along the bundle frames. When `coeff` lies in
/// a cone at the canonical point `diag(1, ..., 1, 0)` of rank `r_seq`, every
/// element lies in the same cone at `X_i`.
pub fn coherent_members(bundle: &SequenceBundle, coeff: &Matrix) -> Vec<Matrix> {
    bundle
        .frames
        .iter()
        .map(|f| f.left() * coeff * f.right().transpose())
        .collect()
}

/// Frame of `diag(1, ..., 1, 0)` (rank `r`), whose bases are identity
/// columns.
pub fn canonical_frame(m: usize, n: usize, r: usize) -> Result<ConeFrame> {
    let x = diag_rect(m, n, &vec![1.0; r]);
    ConeFrame::from_bases(
        &x,
        Matrix::identity(m, r),
        Some(Matrix::identity(m, m).columns(r, m - r).into_owned()),
        Matrix::identity(n, r),
        Some(Matrix::identity(n, n).columns(r, n - r).into_owned()),
    )
}

/// Random cone member at the canonical rank-`r` point, used as frame
/// coefficients.
pub fn canonical_member(m: usize, n: usize, r: usize, spec: &ConeSpec, rng: &mut RandomSource) -> Result<Matrix> {
    random_member(&canonical_frame(m, n, r)?, spec, rng)
}

#[derive(Debug, Clone)]
pub struct OuterCheck {
    pub candidate: ClusterCandidate,
    pub distance: f64,
    pub inside: bool,
}

#[derive(Debug, Clone)]
pub struct OuterFragment {
    /// The upper cone is the whole space.
    pub vacuous: bool,
    /// Whether every sampled element was a member of `Cone(X_i)`.
    pub members_valid: bool,
    pub checks: Vec<OuterCheck>,
}

impl OuterFragment {
    pub fn all_inside(&self) -> bool {
        self.checks.iter().all(|c| c.inside)
    }
}

/// Samples `eta_i in Cone(X_i)` by pushing `coeff` through the frames,
/// extracts cluster candidates from the tail, and measures each against
/// the `upper` cone at the target.
pub fn outer_cluster_check(
    bundle: &SequenceBundle,
    frames: &[ConeFrame],
    spec: &ConeSpec,
    coeff: &Matrix,
    upper: &ConeSpec,
) -> Result<OuterFragment> {
    let seq = coherent_members(bundle, coeff);
    let mut members_valid = true;
    for (f, e) in frames.iter().zip(&seq) {
        members_valid &= cone_membership(f, spec, e, 1e-8)?;
    }
    let target = bundle.target_frame()?;
    let vacuous = matches!(upper.kind, ConeKind::Tangent | ConeKind::RegularTangent)
        && upper.rbar >= target.min_dim();
    let checks = cluster_candidates(&seq, TAIL_FRACTION, CLUSTER_RADIUS)
        .into_iter()
        .map(|candidate| {
            let distance = cone_distance(&target, upper, &candidate.center)?;
            let inside = distance <= CLUSTER_TOL * candidate.center.norm().max(1.0);
            Ok(OuterCheck {
                candidate,
                distance,
                inside,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OuterFragment {
        vacuous,
        members_valid,
        checks,
    })
}
