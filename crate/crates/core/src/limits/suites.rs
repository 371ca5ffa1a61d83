use super::certify::{
    canonical_member, certify_inner, cluster_candidates, coherent_members, index_frames,
    outer_cluster_check, residual_profile, InnerCertificate, CLUSTER_RADIUS, CLUSTER_TOL,
    FLOOR_FACTOR, INNER_TOL, TAIL_FRACTION,
};
use super::grassmann::{gap_distance, tangent_space, vec_rows};
use super::report::{Clause, LimitReport, ProbeKind, ProbeRecord, ResidualRow, ResidualSummary, Verdict};
use crate::blockrank::rotate_to_low_rank_corner;
use crate::cones::{cone_distance, cone_frame, cone_membership, random_member, ConeFrame, ConeKind, ConeSpec};
use crate::exec::Execution;
use crate::matcore::{block2x2, columns, haar_orthogonal, hcat, inner, svd_full};
use crate::seqlab::{
    align_frames_constant_rank, constant_rank_sequence, dense_cluster_sequence,
    planted_cluster_sequence, planted_frame_sequence, random_point, random_rank_sequence,
    SequenceBundle,
};
use crate::variety::numerical_rank;
use crate::{Error, Matrix, RandomSource, Result, DEFAULT_RANK_TOL};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Gap distance the tangent spaces must reach by the end of the sequence.
pub const GAP_TOL: f64 = 1e-6;
/// Pairing tolerance between polar cluster points and primal probes,
/// relative to the product of norms.
pub const PAIRING_TOL: f64 = 1e-6;
/// Continuity regime: a nonmember must stay this far (relative) from the
/// cones along the sequence.
pub const NONMEMBER_FLOOR: f64 = 0.1;

const SURROGATE_NOTE: &str = "limits are certified along the constructed sequences named in each \
clause (plus random ones), not over all sequences converging to the target";

const PROBES: usize = 3;

/// `(m, n, r_low, r, rbar)`: target of rank `r_low`, sequence of rank `r`,
/// cones of the variety of rank at most `rbar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitParams {
    pub m: usize,
    pub n: usize,
    pub r_low: usize,
    pub r: usize,
    pub rbar: usize,
}

impl LimitParams {
    pub fn new(m: usize, n: usize, r_low: usize, r: usize, rbar: usize) -> Self {
        Self { m, n, r_low, r, rbar }
    }

    pub fn min_dim(&self) -> usize {
        self.m.min(self.n)
    }

    fn check_base(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidParams(format!(
                "require m, n >= 1, got m={}, n={}",
                self.m, self.n
            )));
        }
        if self.r_low == 0 {
            return Err(Error::InvalidParams("require r_low >= 1".into()));
        }
        if self.r_low > self.r {
            return Err(Error::InvalidParams(format!(
                "require r_low <= r, got r_low={}, r={}",
                self.r_low, self.r
            )));
        }
        Ok(())
    }

    /// `1 <= r_low <= r <= rbar < min(m, n)`.
    pub fn validate(&self) -> Result<()> {
        self.check_base()?;
        if self.r > self.rbar {
            return Err(Error::RankExceedsVariety {
                r: self.r,
                rbar: self.rbar,
            });
        }
        if self.rbar >= self.min_dim() {
            return Err(Error::InvalidParams(format!(
                "require r̄ < min(m,n), got r̄={}, min(m,n)={}",
                self.rbar,
                self.min_dim()
            )));
        }
        Ok(())
    }

    /// `1 <= r_low < r < min(m, n)`; `rbar` is ignored.
    pub fn validate_whitney(&self) -> Result<()> {
        self.check_base()?;
        if self.r_low == self.r {
            return Err(Error::InvalidParams(format!(
                "require r_low < r, got r_low=r={}",
                self.r
            )));
        }
        self.check_r_below_min()
    }

    /// `1 <= r_low <= r < min(m, n)`; `rbar` is ignored.
    pub fn validate_polar(&self) -> Result<()> {
        self.check_base()?;
        self.check_r_below_min()
    }

    fn check_r_below_min(&self) -> Result<()> {
        if self.r >= self.min_dim() {
            return Err(Error::InvalidParams(format!(
                "require r < min(m,n), got r={}, min(m,n)={}",
                self.r,
                self.min_dim()
            )));
        }
        Ok(())
    }
}

/// Per-trial contribution to one clause.
struct Part {
    name: String,
    tolerance: f64,
    verdict: Verdict,
    probes: Vec<ProbeRecord>,
    rows: Vec<ResidualRow>,
    values: Vec<f64>,
}

impl Part {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            verdict: Verdict::Pass,
            probes: Vec::new(),
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    fn push(&mut self, rec: ProbeRecord) {
        if !rec.ok {
            self.verdict = Verdict::Fail;
        }
        self.probes.push(rec);
    }

    fn profile(&mut self, id: &str, residuals: &[f64]) {
        for (index, &residual) in residuals.iter().enumerate() {
            self.rows.push(ResidualRow {
                index,
                probe_id: id.to_string(),
                residual,
            });
        }
        self.values.extend_from_slice(residuals);
    }

    /// Runs the inner certificate for `probe` and records it; `ok` is
    /// whether the outcome matches `expect_certified`.
    #[allow(clippy::too_many_arguments)]
    fn inner_probe(
        &mut self,
        id: String,
        trial: usize,
        kind: ProbeKind,
        probe: &Matrix,
        frames: &[ConeFrame],
        spec: &ConeSpec,
        distances: &[f64],
        expect_certified: bool,
    ) -> Result<InnerCertificate> {
        let res = residual_profile(frames, spec, probe)?;
        let cert = certify_inner(&res, distances, INNER_TOL);
        self.profile(&id, &res);
        let mut rec = ProbeRecord::new(id, trial, kind, probe.norm(), cert.certified == expect_certified);
        rec.certified = Some(cert.certified);
        rec.c_fit = Some(cert.c_fit).filter(|c| c.is_finite());
        rec.floor = Some(cert.tail_floor);
        self.push(rec);
        Ok(cert)
    }
}

fn run_suite<F>(
    suite: &str,
    params: &LimitParams,
    trials: usize,
    n_len: usize,
    rng: &RandomSource,
    exec: Execution,
    trial_fn: F,
) -> Result<LimitReport>
where
    F: Fn(usize, &RandomSource) -> Result<Vec<Part>> + Sync + Send,
{
    if trials == 0 || n_len < 4 {
        return Err(Error::InvalidParams(format!(
            "require trials >= 1 and N >= 4, got trials={trials}, N={n_len}"
        )));
    }
    let start = Instant::now();
    let outcomes = exec.map(trials, |t| trial_fn(t, &rng.derive(t as u64)));
    let mut clauses: Vec<Clause> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut table = Vec::new();
    for outcome in outcomes {
        for part in outcome? {
            let idx = match clauses.iter().position(|c| c.name == part.name) {
                Some(i) => i,
                None => {
                    clauses.push(Clause {
                        name: part.name.clone(),
                        verdict: part.verdict,
                        tolerance: part.tolerance,
                        residual_summary: ResidualSummary::of(&[]),
                        probes: Vec::new(),
                    });
                    values.push(Vec::new());
                    clauses.len() - 1
                }
            };
            let c = &mut clauses[idx];
            c.verdict = c.verdict.combine(part.verdict);
            c.probes.extend(part.probes);
            values[idx].extend(part.values);
            table.extend(part.rows);
        }
    }
    for (c, v) in clauses.iter_mut().zip(&values) {
        c.residual_summary = ResidualSummary::of(v);
    }
    Ok(LimitReport {
        suite: suite.to_string(),
        params: serde_json::to_value(params)?,
        seed: rng.seed(),
        rng: rng.algorithm().to_string(),
        trials,
        sequence_length: n_len,
        note: SURROGATE_NOTE.to_string(),
        clauses,
        runtime_ms: start.elapsed().as_millis() as u64,
        residual_table: table,
    })
}

/// `sum_{j < count} u_perp_j v_perp_j^T`: a normal-space matrix whose `D`
/// block has `count` equal singular values.
fn complement_probe(frame: &ConeFrame, count: usize) -> Matrix {
    columns(&frame.u_perp, 0, count) * columns(&frame.v_perp, 0, count).transpose()
}

fn scale(a: &Matrix) -> f64 {
    a.norm().max(1.0)
}

/// Which correspondence a tangent-type suite follows along the sequence.
#[derive(Clone, Copy)]
struct Family {
    along: ConeKind,
    /// Lower-cone `D` budget at the target (`rbar - r` for the tangent cone,
    /// 0 for the regular tangent cone).
    s: usize,
}

impl Family {
    fn along(&self, p: &LimitParams) -> ConeSpec {
        ConeSpec::new(self.along, p.rbar)
    }

    fn lower(&self, p: &LimitParams) -> ConeSpec {
        ConeSpec::new(self.along, p.r_low + self.s)
    }

    fn upper_rbar(&self, p: &LimitParams) -> usize {
        p.r_low + 2 * (p.r - p.r_low) + self.s
    }
}

fn tangent_trial(p: &LimitParams, fam: Family, n_len: usize, t: usize, rng: &RandomSource) -> Result<Vec<Part>> {
    if p.r_low < p.r {
        decreasing_rank_trial(p, fam, n_len, t, rng)
    } else {
        continuity_trial(p, fam, n_len, t, rng)
    }
}

fn decreasing_rank_trial(
    p: &LimitParams,
    fam: Family,
    n_len: usize,
    t: usize,
    rng: &RandomSource,
) -> Result<Vec<Part>> {
    let (m, n, r_low, r) = (p.m, p.n, p.r_low, p.r);
    let x = random_point(m, n, r_low, &mut rng.derive(0));
    let tf = cone_frame(&x, DEFAULT_RANK_TOL)?;
    let along = fam.along(p);
    let lower = fam.lower(p);
    let upper_rbar = fam.upper_rbar(p);
    let upper = ConeSpec::tangent(upper_rbar);
    let k = r - r_low;

    let dense = dense_cluster_sequence(&x, r, n_len, &rng.derive(1))?;
    let random = random_rank_sequence(&x, r, n_len, &rng.derive(2))?;
    let dense_frames = index_frames(&dense)?;
    let random_frames = index_frames(&random)?;
    let sequences = [
        ("dense", dense.distances(), &dense_frames),
        ("random", random.distances(), &random_frames),
    ];

    let mut qrng = rng.derive(3);
    let mut probes = vec![(ProbeKind::Zero, Matrix::zeros(m, n))];
    for _ in 0..PROBES {
        probes.push((ProbeKind::LowerMember, random_member(&tf, &lower, &mut qrng)?));
    }
    let mut inner_part = Part::new("inner_lower_bound", INNER_TOL);
    for (j, (kind, probe)) in probes.iter().enumerate() {
        let to_upper = cone_distance(&tf, &upper, probe)?;
        for (name, dist, frames) in &sequences {
            let id = format!("t{t}-lower{j}-{name}");
            inner_part.inner_probe(id, t, *kind, probe, frames, &along, dist, true)?;
            let rec = inner_part.probes.last_mut().expect("just pushed");
            rec.distance = Some(to_upper);
            if to_upper > CLUSTER_TOL * scale(probe) {
                rec.ok = false;
                inner_part.verdict = Verdict::Fail;
            }
        }
    }

    let mut neg_part = Part::new("negative_control", INNER_TOL);
    let neg = complement_probe(&tf, fam.s + 1);
    neg_part.inner_probe(
        format!("t{t}-strict-gap"),
        t,
        ProbeKind::NegativeControl,
        &neg,
        &dense_frames,
        &along,
        &dense.distances(),
        false,
    )?;

    // a target-side vector whose merged block has the largest admissible rank
    let mut srng = rng.derive(4);
    let (dp, dq) = (m - r_low, n - r_low);
    let a = srng.gaussian(r_low, r_low);
    let b = srng.gaussian(r_low, dq);
    let c = srng.gaussian(dp, r_low);
    let d = srng.gaussian_rank(dp, dq, (2 * k + fam.s).min(dp).min(dq));
    let eta = tf.left() * block2x2(&a, &b, &c, &d) * tf.right().transpose();
    let rot = rotate_to_low_rank_corner(&d, k, fam.s)?;
    let strict_coeff = block2x2(&a, &(&b * &rot.v), &(rot.u.transpose() * &c), &rot.m_prime);
    let targets = vec![
        (rot.u.clone(), rot.v.clone()),
        (haar_orthogonal(dp, &mut srng), haar_orthogonal(dq, &mut srng)),
    ];
    let planted = planted_cluster_sequence(&x, r, n_len, &targets, &rng.derive(5))?;
    let planted_frames = index_frames(&planted)?;

    let mut coeffs = vec![(ProbeKind::Planted, strict_coeff)];
    for _ in 0..PROBES {
        coeffs.push((ProbeKind::Sampled, canonical_member(m, n, r, &along, &mut srng)?));
    }
    let mut outer_part = Part::new("outer_upper_bound", CLUSTER_TOL);
    let mut strict_part = Part::new("strict_inclusion", CLUSTER_TOL);
    let mut strict_found = false;
    let mut any_candidate = false;
    let mut vacuous = false;
    for (j, (kind, coeff)) in coeffs.iter().enumerate() {
        let frag = outer_cluster_check(&planted, &planted_frames, &along, coeff, &upper)?;
        vacuous = frag.vacuous;
        if !frag.members_valid {
            outer_part.push(ProbeRecord::new(format!("t{t}-outer{j}-members"), t, *kind, coeff.norm(), false));
        }
        for (ci, check) in frag.checks.iter().enumerate() {
            any_candidate = true;
            let id = format!("t{t}-outer{j}-c{ci}");
            let center = &check.candidate.center;
            outer_part.values.push(check.distance);
            let mut rec = ProbeRecord::new(id.clone(), t, *kind, center.norm(), check.inside);
            rec.distance = Some(check.distance);
            outer_part.push(rec);
            if *kind == ProbeKind::Planted {
                let to_eta = (center - &eta).norm();
                let in_lower = cone_membership(&tf, &lower, center, CLUSTER_TOL)?;
                let ok = to_eta <= CLUSTER_TOL * scale(&eta) && !in_lower && check.inside;
                strict_found |= ok;
                strict_part.values.push(to_eta);
                let mut rec = ProbeRecord::new(id, t, ProbeKind::UpperOnly, center.norm(), ok);
                rec.distance = Some(to_eta);
                rec.ok = true;
                strict_part.probes.push(rec);
            }
        }
    }
    if !any_candidate {
        outer_part.push(ProbeRecord::new(format!("t{t}-outer-none"), t, ProbeKind::Sampled, 0.0, false));
    }
    if vacuous && outer_part.verdict == Verdict::Pass {
        outer_part.verdict = Verdict::Vacuous;
    }
    if !strict_found {
        strict_part.push(ProbeRecord::new(format!("t{t}-strict-none"), t, ProbeKind::UpperOnly, eta.norm(), false));
    }
    Ok(vec![inner_part, outer_part, strict_part, neg_part])
}

fn continuity_trial(
    p: &LimitParams,
    fam: Family,
    n_len: usize,
    t: usize,
    rng: &RandomSource,
) -> Result<Vec<Part>> {
    let (m, n, r) = (p.m, p.n, p.r);
    let x = random_point(m, n, r, &mut rng.derive(0));
    let tf = cone_frame(&x, DEFAULT_RANK_TOL)?;
    let along = fam.along(p);
    let upper = ConeSpec::tangent(fam.upper_rbar(p));
    let seq = constant_rank_sequence(&x, n_len, &rng.derive(1))?;
    let frames = index_frames(&seq)?;
    let dist = seq.distances();

    let mut qrng = rng.derive(3);
    let mut inner_part = Part::new("inner_lower_bound", INNER_TOL);
    let mut probes = vec![(ProbeKind::Zero, Matrix::zeros(m, n))];
    for _ in 0..PROBES {
        probes.push((ProbeKind::LowerMember, random_member(&tf, &along, &mut qrng)?));
    }
    for (j, (kind, probe)) in probes.iter().enumerate() {
        inner_part.inner_probe(format!("t{t}-member{j}"), t, *kind, probe, &frames, &along, &dist, true)?;
    }

    let nonmember = complement_probe(&tf, fam.s + 1);
    let mut neg_part = Part::new("negative_control", INNER_TOL);
    neg_part.inner_probe(
        format!("t{t}-nonmember"),
        t,
        ProbeKind::NegativeControl,
        &nonmember,
        &frames,
        &along,
        &dist,
        false,
    )?;
    let res = residual_profile(&frames, &along, &nonmember)?;
    let floor = res.iter().copied().fold(f64::INFINITY, f64::min);
    let mut cont_part = Part::new("continuity", NONMEMBER_FLOOR);
    cont_part.values.push(floor);
    let mut rec = ProbeRecord::new(
        format!("t{t}-nonmember-floor"),
        t,
        ProbeKind::NegativeControl,
        nonmember.norm(),
        floor >= NONMEMBER_FLOOR * nonmember.norm(),
    );
    rec.floor = Some(floor);
    cont_part.push(rec);
    if inner_part.verdict == Verdict::Fail {
        cont_part.verdict = Verdict::Fail;
    }

    let mut outer_part = Part::new("outer_upper_bound", CLUSTER_TOL);
    let mut any_candidate = false;
    for j in 0..PROBES {
        let coeff = canonical_member(m, n, r, &along, &mut qrng)?;
        let frag = outer_cluster_check(&seq, &frames, &along, &coeff, &upper)?;
        if !frag.members_valid {
            outer_part.push(ProbeRecord::new(format!("t{t}-outer{j}-members"), t, ProbeKind::Sampled, coeff.norm(), false));
        }
        for (ci, check) in frag.checks.iter().enumerate() {
            any_candidate = true;
            outer_part.values.push(check.distance);
            let mut rec = ProbeRecord::new(
                format!("t{t}-outer{j}-c{ci}"),
                t,
                ProbeKind::Sampled,
                check.candidate.center.norm(),
                check.inside,
            );
            rec.distance = Some(check.distance);
            outer_part.push(rec);
        }
    }
    if !any_candidate {
        outer_part.push(ProbeRecord::new(format!("t{t}-outer-none"), t, ProbeKind::Sampled, 0.0, false));
    }
    Ok(vec![inner_part, outer_part, cont_part, neg_part])
}

/// Inner and outer limits of the tangent cone of `R_{<= rbar}` along
/// sequences of rank `r` converging to a random point of rank `r_low`.
///
/// Clauses: `inner_lower_bound`, `outer_upper_bound`, then
/// `strict_inclusion` (`r_low < r`) or `continuity` (`r_low = r`), and
/// `negative_control`.
pub fn verify_main_theorem(
    params: LimitParams,
    trials: usize,
    n_len: usize,
    rng: &RandomSource,
    exec: Execution,
) -> Result<LimitReport> {
    params.validate()?;
    let fam = Family {
        along: ConeKind::Tangent,
        s: params.rbar - params.r,
    };
    run_suite("main", &params, trials, n_len, rng, exec, |t, trng| {
        tangent_trial(&params, fam, n_len, t, trng)
    })
}

/// As [`verify_main_theorem`] for the regular tangent cone: lower cone is
/// the tangent space at the target, upper cone the tangent cone of
/// `R_{<= 2r - r_low}`.
pub fn verify_regular_tangent_limits(
    params: LimitParams,
    trials: usize,
    n_len: usize,
    rng: &RandomSource,
    exec: Execution,
) -> Result<LimitReport> {
    params.validate()?;
    let fam = Family {
        along: ConeKind::RegularTangent,
        s: 0,
    };
    run_suite("regular_tangent", &params, trials, n_len, rng, exec, |t, trng| {
        tangent_trial(&params, fam, n_len, t, trng)
    })
}

/// Writes `nu = U_perp W V_perp^T` (normal to the target) as
/// `U_perp P_2 A' (V_perp Q_2)^T`, where `P = [P_1 P_2]`, `Q = [Q_1 Q_2]`
/// are orthogonal and `P_2` has `m - r` columns.
///
/// Returns `(P, Q, A')`. Planting `(P, Q)` in a decreasing-rank bundle makes
/// `nu` a cluster point of `U_perp_i A' V_perp_i^T`.
pub fn realize_normal_vector(target: &ConeFrame, nu: &Matrix, r: usize) -> Result<(Matrix, Matrix, Matrix)> {
    let (m, n) = (target.rows(), target.cols());
    let (dp, dq) = (m - target.r, n - target.r);
    if r < target.r || r > m.min(n) {
        return Err(Error::InvalidParams(format!(
            "require rank X <= r <= min(m,n), got r={r}"
        )));
    }
    let k = r - target.r;
    let w = target.u_perp.transpose() * nu * &target.v_perp;
    let rank = numerical_rank(&w, DEFAULT_RANK_TOL);
    if rank > (m - r).min(n - r) {
        return Err(Error::NotInCone(format!(
            "normal block of rank {rank} does not fit in {}x{}",
            m - r,
            n - r
        )));
    }
    let f = svd_full(&w)?;
    let p = hcat(dp, &[&columns(&f.u, dp - k, k), &columns(&f.u, 0, dp - k)]);
    let q = hcat(dq, &[&columns(&f.v, dq - k, k), &columns(&f.v, 0, dq - k)]);
    let a = columns(&p, k, dp - k).transpose() * w * columns(&q, k, dq - k);
    Ok((p, q, a))
}

fn normal_trial(p: &LimitParams, n_len: usize, t: usize, rng: &RandomSource) -> Result<Vec<Part>> {
    let (m, n, r_low, r) = (p.m, p.n, p.r_low, p.r);
    let x = random_point(m, n, r_low, &mut rng.derive(0));
    let tf = cone_frame(&x, DEFAULT_RANK_TOL)?;
    let normal = ConeSpec::new(ConeKind::Normal, p.rbar);
    let clarke = ConeSpec::new(ConeKind::ClarkeNormal, p.rbar);
    let kinds = [ConeKind::RegularNormal, ConeKind::Normal, ConeKind::ClarkeNormal];
    let mut qrng = rng.derive(3);

    let mut probes = vec![(ProbeKind::Zero, Matrix::zeros(m, n))];
    for _ in 0..PROBES {
        probes.push((ProbeKind::NegativeControl, random_member(&tf, &normal, &mut qrng)?));
    }
    for _ in 0..PROBES {
        probes.push((ProbeKind::NegativeControl, random_member(&tf, &clarke, &mut qrng)?));
    }

    if r_low == r {
        let seq = constant_rank_sequence(&x, n_len, &rng.derive(1))?;
        let frames = index_frames(&seq)?;
        let dist = seq.distances();
        let mut cont = Part::new("continuity", INNER_TOL);
        let mut neg = Part::new("negative_control", INNER_TOL);
        let tangent_probe = random_member(&tf, &ConeSpec::new(ConeKind::RegularTangent, p.rbar), &mut qrng)?;
        for kind in kinds {
            let spec = ConeSpec::new(kind, p.rbar);
            let member = random_member(&tf, &spec, &mut qrng)?;
            let id = format!("t{t}-{}-member", kind.name());
            cont.inner_probe(id, t, ProbeKind::LowerMember, &member, &frames, &spec, &dist, true)?;
            let id = format!("t{t}-{}-tangent", kind.name());
            neg.inner_probe(id, t, ProbeKind::NegativeControl, &tangent_probe, &frames, &spec, &dist, false)?;
        }
        return Ok(vec![cont, neg]);
    }

    // (a) inner limits collapse to {0} along the dense bundle
    let dense = dense_cluster_sequence(&x, r, n_len, &rng.derive(1))?;
    let frames = index_frames(&dense)?;
    let dist = dense.distances();
    let mut collapse = Part::new("inner_collapse", FLOOR_FACTOR * INNER_TOL);
    for kind in kinds {
        let spec = ConeSpec::new(kind, p.rbar);
        for (j, (pk, probe)) in probes.iter().enumerate() {
            let id = format!("t{t}-{}-probe{j}", kind.name());
            let zero = *pk == ProbeKind::Zero;
            let cert = collapse.inner_probe(id, t, *pk, probe, &frames, &spec, &dist, zero)?;
            if !zero && cert.tail_floor <= FLOOR_FACTOR * INNER_TOL {
                collapse.probes.last_mut().expect("just pushed").ok = false;
                collapse.verdict = Verdict::Fail;
            }
        }
    }

    // (b) every normal vector is a cluster point; (c) Clarke limits relative
    // to the rank-r stratum
    let mut nrng = rng.derive(4);
    let mut recover: Vec<(&'static str, Matrix, Matrix)> = Vec::new();
    let mut targets = Vec::new();
    let normal_r = ConeSpec::new(ConeKind::Normal, r);
    for (label, spec) in [("normal", &normal), ("clarke_limit", &normal_r)] {
        let count = if label == "normal" { PROBES } else { 2 };
        for _ in 0..count {
            let nu = random_member(&tf, spec, &mut nrng)?;
            let (pp, qq, a) = realize_normal_vector(&tf, &nu, r)?;
            targets.push((pp, qq));
            recover.push((label, nu, a));
        }
    }
    let planted = planted_cluster_sequence(&x, r, n_len, &targets, &rng.derive(5))?;
    let pframes = index_frames(&planted)?;
    let mut recovery = Part::new("cluster_recovery", CLUSTER_TOL);
    let mut clarke_part = Part::new("clarke_outer_limit", CLUSTER_TOL);
    for (j, (label, nu, a)) in recover.iter().enumerate() {
        let seq: Vec<Matrix> = planted
            .frames
            .iter()
            .map(|f| &f.u_perp * a * f.v_perp.transpose())
            .collect();
        let member_spec = if *label == "normal" { &normal } else { &clarke };
        let mut valid = true;
        for (f, e) in pframes.iter().zip(&seq) {
            valid &= cone_membership(f, member_spec, e, 1e-8)?;
        }
        let cands = cluster_candidates(&seq, TAIL_FRACTION, CLUSTER_RADIUS);
        let best = cands
            .iter()
            .map(|c| (&c.center - nu).norm())
            .fold(f64::INFINITY, f64::min);
        let bound = if *label == "normal" { &normal } else { &normal_r };
        let mut inside = true;
        for c in &cands {
            inside &= cone_distance(&tf, bound, &c.center)? <= CLUSTER_TOL * scale(&c.center);
        }
        let ok = valid && inside && best <= CLUSTER_TOL * scale(nu);
        let mut rec = ProbeRecord::new(format!("t{t}-{label}{j}"), t, ProbeKind::Planted, nu.norm(), ok);
        rec.distance = Some(best);
        rec.candidates = Some(cands.len());
        let part = if *label == "normal" { &mut recovery } else { &mut clarke_part };
        part.values.push(best);
        part.push(rec);
    }
    let mut any_candidate = false;
    for j in 0..PROBES {
        let coeff = canonical_member(m, n, r, &clarke, &mut nrng)?;
        let frag = outer_cluster_check(&planted, &pframes, &clarke, &coeff, &normal_r)?;
        if !frag.members_valid {
            clarke_part.push(ProbeRecord::new(format!("t{t}-clarke{j}-members"), t, ProbeKind::Sampled, coeff.norm(), false));
        }
        for (ci, check) in frag.checks.iter().enumerate() {
            any_candidate = true;
            clarke_part.values.push(check.distance);
            let mut rec = ProbeRecord::new(
                format!("t{t}-clarke{j}-c{ci}"),
                t,
                ProbeKind::Sampled,
                check.candidate.center.norm(),
                check.inside,
            );
            rec.distance = Some(check.distance);
            clarke_part.push(rec);
        }
    }
    if !any_candidate {
        clarke_part.push(ProbeRecord::new(format!("t{t}-clarke-none"), t, ProbeKind::Sampled, 0.0, false));
    }
    Ok(vec![collapse, recovery, clarke_part])
}

/// Limits of the regular normal, normal and Clarke normal cones along
/// rank-`r` sequences converging to a point of rank `r_low`.
///
/// Clauses for `r_low < r`: `inner_collapse`, `cluster_recovery`,
/// `clarke_outer_limit`; for `r_low = r`: `continuity`, `negative_control`.
pub fn verify_normal_cone_limits(
    params: LimitParams,
    trials: usize,
    n_len: usize,
    rng: &RandomSource,
    exec: Execution,
) -> Result<LimitReport> {
    params.validate()?;
    run_suite("normal", &params, trials, n_len, rng, exec, |t, trng| {
        normal_trial(&params, n_len, t, trng)
    })
}

fn whitney_trial(p: &LimitParams, n_len: usize, t: usize, rng: &RandomSource) -> Result<Vec<Part>> {
    let (m, n, r_low, r) = (p.m, p.n, p.r_low, p.r);
    let x = random_point(m, n, r_low, &mut rng.derive(0));
    let tf = cone_frame(&x, DEFAULT_RANK_TOL)?;
    let bundle = planted_frame_sequence(&x, r, n_len, &rng.derive(1))?;
    let frames = index_frames(&bundle)?;
    let dist = bundle.distances();
    let f0 = &bundle.frames[0];
    let limit = tangent_space(&f0.u_perp, &f0.v_perp)?;
    let along = ConeSpec::new(ConeKind::RegularTangent, r);

    let mut gap_part = Part::new("gap_convergence", GAP_TOL);
    let gaps = frames
        .iter()
        .map(|f| gap_distance(&tangent_space(&f.u_perp, &f.v_perp)?, &limit))
        .collect::<Result<Vec<_>>>()?;
    gap_part.profile(&format!("t{t}-gap"), &gaps);
    let last = *gaps.last().expect("nonempty");
    let mut rec = ProbeRecord::new(format!("t{t}-gap"), t, ProbeKind::Random, 0.0, last <= GAP_TOL);
    rec.distance = Some(last);
    gap_part.push(rec);

    let mut qrng = rng.derive(3);
    let mut areg = Part::new("a_regularity", INNER_TOL);
    let space_at_x = ConeSpec::new(ConeKind::RegularTangent, r);
    let mut probes = vec![(ProbeKind::Zero, Matrix::zeros(m, n))];
    for _ in 0..PROBES {
        probes.push((ProbeKind::LowerMember, random_member(&tf, &space_at_x, &mut qrng)?));
    }
    for (j, (kind, probe)) in probes.iter().enumerate() {
        areg.inner_probe(format!("t{t}-space{j}"), t, *kind, probe, &frames, &along, &dist, true)?;
        let d = limit.distance(&vec_rows(probe));
        let rec = areg.probes.last_mut().expect("just pushed");
        rec.distance = Some(d);
        if d > CLUSTER_TOL * scale(probe) {
            rec.ok = false;
            areg.verdict = Verdict::Fail;
        }
    }

    let mut p_inner = Part::new("painleve_inner", INNER_TOL);
    let mut p_outer = Part::new("painleve_outer", CLUSTER_TOL);
    let mut any_candidate = false;
    for j in 0..PROBES {
        let coeff = canonical_member(m, n, r, &along, &mut qrng)?;
        let member = f0.left() * &coeff * f0.right().transpose();
        p_inner.inner_probe(format!("t{t}-limit{j}"), t, ProbeKind::Sampled, &member, &frames, &along, &dist, true)?;
        let seq = coherent_members(&bundle, &coeff);
        for (ci, c) in cluster_candidates(&seq, TAIL_FRACTION, CLUSTER_RADIUS).iter().enumerate() {
            any_candidate = true;
            let d = limit.distance(&vec_rows(&c.center));
            p_outer.values.push(d);
            let mut rec = ProbeRecord::new(
                format!("t{t}-limit{j}-c{ci}"),
                t,
                ProbeKind::Sampled,
                c.center.norm(),
                d <= CLUSTER_TOL * scale(&c.center),
            );
            rec.distance = Some(d);
            p_outer.push(rec);
        }
    }
    if !any_candidate {
        p_outer.push(ProbeRecord::new(format!("t{t}-limit-none"), t, ProbeKind::Sampled, 0.0, false));
    }

    let mut neg = Part::new("negative_control", INNER_TOL);
    let nu = columns(&f0.u_perp, 0, 1) * columns(&f0.v_perp, 0, 1).transpose();
    neg.inner_probe(format!("t{t}-normal"), t, ProbeKind::NegativeControl, &nu, &frames, &along, &dist, false)?;
    Ok(vec![gap_part, areg, p_inner, p_outer, neg])
}

/// Gap convergence of the fixed-rank tangent spaces along a bundle with a
/// constant planted complement frame, and the inclusion of the tangent
/// space at the target in their limit.
pub fn whitney_a_regularity_check(
    params: LimitParams,
    n_len: usize,
    trials: usize,
    rng: &RandomSource,
    exec: Execution,
) -> Result<LimitReport> {
    params.validate_whitney()?;
    run_suite("whitney", &params, trials, n_len, rng, exec, |t, trng| {
        whitney_trial(&params, n_len, t, trng)
    })
}

/// Cone sequence used by [`polar_limit_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarScenario {
    /// `X_i = X` of rank `r`: tangent spaces and normal spaces at `X`.
    ConstantTangentSpace,
    /// Regular tangent cones along decreasing-rank bundles (`r_low < r`).
    DecreasingRankTangentSpaces,
    /// `{0}` along the sequence; the polars are the whole space.
    ZeroCone,
}

impl PolarScenario {
    pub const ALL: [PolarScenario; 3] = [
        PolarScenario::ConstantTangentSpace,
        PolarScenario::DecreasingRankTangentSpaces,
        PolarScenario::ZeroCone,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolarScenario::ConstantTangentSpace => "constant_tangent_space",
            PolarScenario::DecreasingRankTangentSpaces => "decreasing_rank_tangent_spaces",
            PolarScenario::ZeroCone => "zero_cone",
        }
    }
}

/// Residual of `probe` against the primal cone or its polar at each index.
enum Cones<'a> {
    Spec(&'a [ConeFrame], ConeSpec),
    Zero(usize),
    Whole(usize),
}

impl Cones<'_> {
    fn residuals(&self, probe: &Matrix) -> Result<Vec<f64>> {
        match self {
            Cones::Spec(frames, spec) => residual_profile(frames, spec, probe),
            Cones::Zero(len) => Ok(vec![probe.norm(); *len]),
            Cones::Whole(len) => Ok(vec![0.0; *len]),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn record_inner(
    part: &mut Part,
    id: String,
    t: usize,
    kind: ProbeKind,
    probe: &Matrix,
    cones: &Cones,
    dist: &[f64],
    expect: bool,
) -> Result<bool> {
    let res = cones.residuals(probe)?;
    let cert = certify_inner(&res, dist, INNER_TOL);
    part.profile(&id, &res);
    let mut rec = ProbeRecord::new(id, t, kind, probe.norm(), cert.certified == expect);
    rec.certified = Some(cert.certified);
    rec.floor = Some(cert.tail_floor);
    part.push(rec);
    Ok(cert.certified)
}

fn polar_trial(p: &LimitParams, n_len: usize, t: usize, rng: &RandomSource) -> Result<Vec<Part>> {
    let (m, n, r_low, r) = (p.m, p.n, p.r_low, p.r);
    let space = ConeSpec::new(ConeKind::RegularTangent, r);
    let normal_space = ConeSpec::new(ConeKind::ClarkeNormal, r);
    let mut parts = Vec::new();
    for (si, scenario) in PolarScenario::ALL.into_iter().enumerate() {
        if scenario == PolarScenario::DecreasingRankTangentSpaces && r_low == r {
            continue;
        }
        let srng = rng.derive(10 + si as u64);
        let mut qrng = srng.derive(3);
        let rank_x = if scenario == PolarScenario::ConstantTangentSpace { r } else { r_low };
        let x = random_point(m, n, rank_x, &mut srng.derive(0));
        let tf = cone_frame(&x, DEFAULT_RANK_TOL)?;
        let bundle: SequenceBundle = match scenario {
            PolarScenario::DecreasingRankTangentSpaces => {
                let targets = (0..2)
                    .map(|_| (haar_orthogonal(m - r_low, &mut qrng), haar_orthogonal(n - r_low, &mut qrng)))
                    .collect::<Vec<_>>();
                planted_cluster_sequence(&x, r, n_len, &targets, &srng.derive(1))?
            }
            _ => align_frames_constant_rank(&x, &vec![x.clone(); n_len])?,
        };
        let frames = index_frames(&bundle)?;
        let dist = bundle.distances();
        let (primal, polar) = match scenario {
            PolarScenario::ZeroCone => (Cones::Zero(n_len), Cones::Whole(n_len)),
            _ => (Cones::Spec(&frames, space), Cones::Spec(&frames, normal_space)),
        };
        let name = scenario.name();
        let mut inner_part = Part::new(&format!("{name}.inner_of_polars"), INNER_TOL);
        let mut outer_part = Part::new(&format!("{name}.outer_of_polars"), PAIRING_TOL);

        // members of the polar of the outer-limit bound
        let polar_of_bound: Vec<Matrix> = match scenario {
            PolarScenario::ConstantTangentSpace => (0..PROBES)
                .map(|_| random_member(&tf, &normal_space, &mut qrng))
                .collect::<Result<_>>()?,
            PolarScenario::DecreasingRankTangentSpaces => {
                let bound = ConeSpec::new(ConeKind::RegularNormal, 2 * r - r_low);
                vec![random_member(&tf, &bound, &mut qrng)?]
            }
            PolarScenario::ZeroCone => (0..PROBES).map(|_| qrng.gaussian(m, n)).collect(),
        };
        for (j, probe) in polar_of_bound.iter().enumerate() {
            let kind = if probe.norm() == 0.0 { ProbeKind::Zero } else { ProbeKind::Random };
            record_inner(&mut inner_part, format!("t{t}-{name}-polar{j}"), t, kind, probe, &polar, &dist, true)?;
        }
        if scenario == PolarScenario::DecreasingRankTangentSpaces {
            // the polars have inner limit {0}: a nonzero normal vector is not
            // reached along the i.i.d. bundle
            let dense = dense_cluster_sequence(&x, r, n_len, &srng.derive(2))?;
            let dframes = index_frames(&dense)?;
            let nu = random_member(&tf, &ConeSpec::new(ConeKind::ClarkeNormal, r), &mut qrng)?;
            let cones = Cones::Spec(&dframes, normal_space);
            let id = format!("t{t}-{name}-negative");
            record_inner(&mut inner_part, id, t, ProbeKind::NegativeControl, &nu, &cones, &dense.distances(), false)?;
        }

        // polar cluster points annihilate inner-certified primal probes
        let mut primal_probes = vec![Matrix::zeros(m, n)];
        if scenario != PolarScenario::ZeroCone {
            let at_x = ConeSpec::new(ConeKind::RegularTangent, rank_x.max(1));
            for _ in 0..PROBES {
                primal_probes.push(random_member(&tf, &at_x, &mut qrng)?);
            }
        } else {
            primal_probes.push(qrng.gaussian(m, n));
        }
        let mut certified = Vec::new();
        for (j, probe) in primal_probes.iter().enumerate() {
            let res = primal.residuals(probe)?;
            let cert = certify_inner(&res, &dist, INNER_TOL);
            outer_part.profile(&format!("t{t}-{name}-primal{j}"), &res);
            if cert.certified {
                certified.push(probe.clone());
            }
        }
        let mut any_candidate = false;
        for j in 0..PROBES {
            let coeff = match scenario {
                PolarScenario::ZeroCone => qrng.gaussian(m, n),
                _ => canonical_member(m, n, r, &normal_space, &mut qrng)?,
            };
            let seq = coherent_members(&bundle, &coeff);
            for (ci, c) in cluster_candidates(&seq, TAIL_FRACTION, CLUSTER_RADIUS).iter().enumerate() {
                any_candidate = true;
                let worst = certified
                    .iter()
                    .map(|eta| inner(&c.center, eta).abs() / (c.center.norm() * eta.norm()).max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                outer_part.values.push(worst);
                let mut rec = ProbeRecord::new(
                    format!("t{t}-{name}-polar{j}-c{ci}"),
                    t,
                    ProbeKind::Sampled,
                    c.center.norm(),
                    worst <= PAIRING_TOL,
                );
                rec.distance = Some(worst);
                outer_part.push(rec);
            }
        }
        if !any_candidate {
            outer_part.push(ProbeRecord::new(format!("t{t}-{name}-none"), t, ProbeKind::Sampled, 0.0, false));
        }
        parts.push(inner_part);
        parts.push(outer_part);
    }
    Ok(parts)
}

/// Polar relations between inner and outer limits of convex cone
/// sequences: polar members of the outer-limit bound are inner-certified
/// for the polar sequence, and polar cluster points annihilate
/// inner-certified primal probes.
pub fn polar_limit_check(
    params: LimitParams,
    trials: usize,
    n_len: usize,
    rng: &RandomSource,
    exec: Execution,
) -> Result<LimitReport> {
    params.validate_polar()?;
    run_suite("polar", &params, trials, n_len, rng, exec, |t, trng| {
        polar_trial(&params, n_len, t, trng)
    })
}
