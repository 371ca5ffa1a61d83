#![allow(clippy::type_complexity)]
//! Acceptance run: one line per criterion, non-zero exit if any fails.

use lowrank_cones::blockrank::{exact_rank, rank_bound, rotate_to_low_rank_corner, tight_witness, BlockShape};
use lowrank_cones::cones::{cone_frame, cone_membership, project_cone, random_member, ConeKind, ConeSpec};
use lowrank_cones::exec::Execution;
use lowrank_cones::limits::{
    polar_limit_check, verify_main_theorem, verify_normal_cone_limits, verify_regular_tangent_limits,
    whitney_a_regularity_check, LimitParams, LimitReport, ProbeKind, Verdict,
};
use lowrank_cones::matcore::{block2x2, orthonormality_residual};
use lowrank_cones::variety::truncate_rank;
use lowrank_cones::{Matrix, RandomSource};
use std::collections::HashMap;
use std::time::Instant;

const SEED: u64 = 20240611;
const N_LEN: usize = 200;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Singular values from nalgebra's own SVD, independent of the crate's.
fn oracle_sigma(a: &Matrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

fn oracle_rank(a: &Matrix, tol: f64, scale: f64) -> usize {
    let s = oracle_sigma(a);
    let top = s.first().copied().unwrap_or(0.0).max(scale);
    s.iter().filter(|&&x| x > tol * top).count()
}

fn criterion_1() -> Outcome {
    let mut rng = RandomSource::new(SEED);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.range(1, 9);
        let n = rng.range(1, 9);
        let x = rng.gaussian(m, n);
        let sigma = oracle_sigma(&x);
        for r in 0..=m.min(n) {
            let tail: f64 = sigma.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt();
            let err = ((&x - truncate_rank(&x, r).unwrap()).norm() - tail).abs() / x.norm().max(1.0);
            worst = worst.max(err);
        }
    }
    outcome(worst <= 1e-10, format!("worst relative gap {worst:.3e} (tol 1e-10)"))
}

fn criterion_2() -> Outcome {
    let mut grid = Vec::new();
    for m in 2..=6 {
        for n in 2..=6 {
            for rbar in 1..m.min(n) {
                for r in 1..=rbar {
                    grid.push((m, n, r, rbar));
                }
            }
        }
    }
    let mut rng = RandomSource::new(SEED + 2);
    let (mut false_neg, mut false_pos) = (0, 0);
    for t in 0..500 {
        let (m, n, r, rbar) = grid[t % grid.len()];
        let x = rng.gaussian_rank(m, n, r);
        let f = cone_frame(&x, 1e-9).unwrap();
        let spec = ConeSpec::tangent(rbar);
        for (d_rank, expect) in [(rbar - r, true), (rbar - r + 1, false)] {
            let d = rng.gaussian_rank(m - r, n - r, d_rank);
            let blocks = block2x2(&rng.gaussian(r, r), &rng.gaussian(r, n - r), &rng.gaussian(m - r, r), &d);
            let eta = f.left() * blocks * f.right().transpose();
            let got = cone_membership(&f, &spec, &eta, 1e-9).unwrap();
            if got != expect {
                if expect {
                    false_neg += 1;
                } else {
                    false_pos += 1;
                }
            }
        }
    }
    outcome(
        false_neg == 0 && false_pos == 0,
        format!("{} shapes; members rejected {false_neg}/500, nonmembers accepted {false_pos}/500", grid.len()),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = RandomSource::new(SEED + 3);
    let mut worst = f64::NEG_INFINITY;
    for kind in ConeKind::ALL {
        for _ in 0..50 {
            let m = rng.range(2, 7);
            let n = rng.range(2, 7);
            let r = rng.range(1, m.min(n));
            let rbar = rng.range(r, m.min(n));
            let x = rng.gaussian_rank(m, n, r);
            let f = cone_frame(&x, 1e-9).unwrap();
            let spec = ConeSpec::new(kind, rbar);
            let eta = rng.gaussian(m, n);
            let proj = project_cone(&f, &spec, &eta).unwrap();
            let best = (&eta - &proj).norm();
            for c in 0..1000 {
                let cand = if c % 2 == 0 {
                    let mem = random_member(&f, &spec, &mut rng).unwrap();
                    let s = mem.norm();
                    if s > 0.0 {
                        mem * (2.0 * rng.uniform() * eta.norm() / s)
                    } else {
                        mem
                    }
                } else {
                    let eps = 10f64.powf(-3.0 * rng.uniform());
                    project_cone(&f, &spec, &(&proj + rng.gaussian(m, n) * eps)).unwrap()
                };
                worst = worst.max(best - (&eta - cand).norm());
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("5 kinds x 50 pairs x 1000 candidates; max advantage of a candidate {worst:.3e} (slack 1e-9)"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = RandomSource::new(SEED + 4);
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..500 {
        let m = rng.range(3, 8);
        let n = rng.range(3, 8);
        let rbar = rng.range(1, m.min(n));
        let r = rng.range(0, rbar);
        let x = rng.gaussian_rank(m, n, r);
        let f = cone_frame(&x, 1e-9).unwrap();
        let spec = |k| ConeSpec::new(k, rbar);
        let mut samples = vec![rng.gaussian(m, n)];
        for k in [ConeKind::RegularNormal, ConeKind::Normal, ConeKind::ClarkeNormal] {
            samples.push(random_member(&f, &spec(k), &mut rng).unwrap());
            let g = rng.gaussian(m, n);
            samples.push(project_cone(&f, &spec(k), &g).unwrap());
        }
        for eta in &samples {
            let reg = cone_membership(&f, &spec(ConeKind::RegularNormal), eta, 1e-8).unwrap();
            let lim = cone_membership(&f, &spec(ConeKind::Normal), eta, 1e-8).unwrap();
            let clarke = cone_membership(&f, &spec(ConeKind::ClarkeNormal), eta, 1e-8).unwrap();
            checked += 1;
            if (reg && !lim) || (lim && !clarke) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checked} samples over 500 trials"))
}

/// Random integer matrix with entries in `-2..=2`.
fn int_matrix(rng: &mut RandomSource, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.range(0, 5) as f64 - 2.0)
}

fn criterion_5() -> Outcome {
    let mut rng = RandomSource::new(SEED + 5);
    let grid = BlockShape::grid(4);
    let (mut over, mut untight) = (0, 0);
    for shape in &grid {
        let BlockShape { k, p, q, s } = *shape;
        let bound = rank_bound(*shape);
        for _ in 0..1000 {
            let d = int_matrix(&mut rng, p, s) * int_matrix(&mut rng, s, q);
            let m = block2x2(&int_matrix(&mut rng, k, k), &int_matrix(&mut rng, k, q), &int_matrix(&mut rng, p, k), &d);
            if exact_rank(&m).unwrap() > bound {
                over += 1;
            }
        }
        let w = tight_witness(*shape);
        if exact_rank(&w) != Some(bound) || exact_rank(&shape.d_block(&w)).unwrap() > s {
            untight += 1;
        }
    }
    outcome(
        over == 0 && untight == 0,
        format!("{} shapes x 1000 assemblies: {over} above bound; {untight} witnesses off the bound", grid.len()),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = RandomSource::new(SEED + 6);
    let grid = BlockShape::grid(4);
    let (mut worst_rec, mut worst_orth, mut over_budget) = (0.0f64, 0.0f64, 0);
    for shape in &grid {
        let BlockShape { k, p, q, s } = *shape;
        let c = (2 * k + s).min(k + p).min(k + q);
        let budget = s.min(p.min(q).saturating_sub(k));
        for _ in 0..200 {
            let m = rng.gaussian(k + p, c) * rng.gaussian(k + q, c).transpose();
            let rot = rotate_to_low_rank_corner(&m, k, s).unwrap();
            let rec = (&rot.u * &rot.m_prime * rot.v.transpose() - &m).norm() / m.norm();
            worst_rec = worst_rec.max(rec);
            worst_orth = worst_orth.max(orthonormality_residual(&rot.u)).max(orthonormality_residual(&rot.v));
            if oracle_rank(&rot.d_prime(k), 1e-9, oracle_sigma(&m)[0]) > budget {
                over_budget += 1;
            }
        }
    }
    outcome(
        worst_rec <= 1e-10 && worst_orth <= 1e-10 && over_budget == 0,
        format!(
            "{} shapes x 200: reconstruction {worst_rec:.2e}, orthogonality {worst_orth:.2e}, {over_budget} over budget",
            grid.len()
        ),
    )
}

fn rng() -> RandomSource {
    RandomSource::new(SEED)
}

fn run(
    f: fn(LimitParams, usize, usize, &RandomSource, Execution) -> lowrank_cones::Result<LimitReport>,
    p: (usize, usize, usize, usize, usize),
    trials: usize,
    n_len: usize,
) -> LimitReport {
    f(LimitParams::new(p.0, p.1, p.2, p.3, p.4), trials, n_len, &rng(), Execution::default()).unwrap()
}

fn whitney(p: LimitParams, trials: usize, n_len: usize, rng: &RandomSource, e: Execution) -> lowrank_cones::Result<LimitReport> {
    whitney_a_regularity_check(p, n_len, trials, rng, e)
}

fn clause_ok(report: &LimitReport, name: &str) -> (bool, usize) {
    let c = report.clause(name).unwrap_or_else(|| panic!("missing clause {name}"));
    (c.verdict != Verdict::Fail, c.failures().count())
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [(4, 4, 1, 2, 2), (5, 5, 1, 2, 3), (5, 6, 2, 3, 4)] {
        let rep = run(verify_main_theorem, p, 20, N_LEN);
        let c = rep.clause("inner_lower_bound").unwrap();
        let fails = c.failures().count();
        pass &= c.verdict == Verdict::Pass && fails == 0;
        parts.push(format!("{:?}: {} probes, {fails} failures", p, c.probes.len()));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let rep = run(verify_main_theorem, (4, 4, 1, 2, 2), 20, N_LEN);
    let (outer_ok, outer_fail) = clause_ok(&rep, "outer_upper_bound");
    let strict = rep.clause("strict_inclusion").unwrap();
    let trials_with_strict = (0..20)
        .filter(|t| strict.probes.iter().any(|p| p.trial == *t && p.ok && p.distance.is_some_and(|d| d <= 1e-6 * p.norm.max(1.0))))
        .count();
    let worst = rep.clause("outer_upper_bound").unwrap().residual_summary.max;
    outcome(
        outer_ok && strict.verdict == Verdict::Pass && trials_with_strict == 20,
        format!(
            "outer: {outer_fail} candidates outside (max distance {worst:.2e}); strict witness in {trials_with_strict}/20 trials"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [(4, 4, 2, 2, 3), (5, 6, 3, 3, 4)] {
        for (name, f) in [
            ("tangent", verify_main_theorem as fn(_, _, _, &_, _) -> _),
            ("regular", verify_regular_tangent_limits),
        ] {
            let rep = run(f, p, 20, N_LEN);
            let (inner_ok, inner_fail) = clause_ok(&rep, "inner_lower_bound");
            let (cont_ok, cont_fail) = clause_ok(&rep, "continuity");
            pass &= inner_ok && cont_ok;
            parts.push(format!("{name} {p:?}: {} failures", inner_fail + cont_fail));
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let rep = run(verify_normal_cone_limits, (4, 4, 1, 2, 2), 20, N_LEN);
    let clause = rep.clause("inner_collapse").unwrap();
    let norms: HashMap<&str, f64> = clause
        .probes
        .iter()
        .filter(|p| p.kind != ProbeKind::Zero && p.norm > 0.0)
        .map(|p| (p.id.as_str(), p.norm))
        .collect();
    let mut worst = f64::INFINITY;
    for row in &rep.residual_table {
        if row.index <= N_LEN / 2 {
            continue;
        }
        if let Some(norm) = norms.get(row.probe_id.as_str()) {
            worst = worst.min(row.residual / norm);
        }
    }
    outcome(
        worst >= 0.5,
        format!(
            "{} nonzero probes; min residual/|probe| beyond N/2 = {worst:.3} (required >= 0.5); floor-vs-certificate clause: {:?}",
            norms.len(),
            clause.verdict
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [(4, 4, 1, 2, 2), (5, 6, 1, 2, 3)] {
        let rep = run(verify_normal_cone_limits, p, 20, N_LEN);
        let c = rep.clause("cluster_recovery").unwrap();
        pass &= c.verdict == Verdict::Pass;
        parts.push(format!(
            "{p:?}: {}/{} recovered, max distance {:.2e}",
            c.probes.iter().filter(|r| r.ok).count(),
            c.probes.len(),
            c.residual_summary.max
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_12() -> Outcome {
    let rep = run(whitney, (4, 4, 1, 2, 2), 10, N_LEN);
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["gap_convergence", "a_regularity", "painleve_inner", "painleve_outer", "negative_control"] {
        let (ok, fails) = clause_ok(&rep, name);
        pass &= ok;
        parts.push(format!("{name} {}", if ok { "ok".to_string() } else { format!("{fails} failures") }));
    }
    let last_gap = rep
        .clause("gap_convergence")
        .unwrap()
        .probes
        .iter()
        .filter_map(|p| p.distance)
        .fold(0.0, f64::max);
    parts.push(format!("final gap <= {last_gap:.2e}"));
    outcome(pass, parts.join("; "))
}

type Suite = fn(LimitParams, usize, usize, &RandomSource, Execution) -> lowrank_cones::Result<LimitReport>;

fn suites() -> Vec<(&'static str, Suite, (usize, usize, usize, usize, usize))> {
    vec![
        ("main", verify_main_theorem, (4, 4, 1, 2, 2)),
        ("regular_tangent", verify_regular_tangent_limits, (5, 5, 1, 2, 3)),
        ("normal", verify_normal_cone_limits, (4, 4, 1, 2, 2)),
        ("whitney", whitney, (4, 4, 1, 2, 2)),
        ("polar", polar_limit_check, (4, 4, 1, 2, 2)),
    ]
}

fn criterion_13() -> Outcome {
    let mut identical = 0;
    let mut differing = Vec::new();
    for (name, f, p) in suites() {
        let params = LimitParams::new(p.0, p.1, p.2, p.3, p.4);
        let a = f(params, 3, 100, &rng(), Execution::Sequential).unwrap();
        let b = f(params, 3, 100, &rng(), Execution::Sequential).unwrap();
        let c = f(params, 3, 100, &rng(), Execution::Parallel).unwrap();
        let same = a.canonical_json().unwrap() == b.canonical_json().unwrap()
            && a.canonical_json().unwrap() == c.canonical_json().unwrap()
            && a.to_csv() == b.to_csv()
            && a.to_csv() == c.to_csv();
        if same {
            identical += 1;
        } else {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("{identical}/5 suites byte-identical across reruns and execution modes {differing:?}"),
    )
}

/// Cluster candidates and verdicts must not change when the sequence is
/// doubled.
fn doubling_stability() -> Outcome {
    let mut changed = Vec::new();
    for (name, f, p) in suites() {
        let params = LimitParams::new(p.0, p.1, p.2, p.3, p.4);
        let short = f(params, 5, N_LEN, &rng(), Execution::default()).unwrap();
        let long = f(params, 5, 2 * N_LEN, &rng(), Execution::default()).unwrap();
        for (a, b) in short.clauses.iter().zip(&long.clauses) {
            if a.name != b.name || (a.verdict == Verdict::Fail) != (b.verdict == Verdict::Fail) {
                changed.push(format!("{name}/{}", a.name));
            }
        }
    }
    outcome(changed.is_empty(), format!("N={N_LEN} vs N={}: changed verdicts {changed:?}", 2 * N_LEN))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1  best rank-r approximation error", criterion_1),
        ("2  tangent cone block characterization", criterion_2),
        ("3  metric projection optimality", criterion_3),
        ("4  normal cone nesting", criterion_4),
        ("5  block rank bound and tightness", criterion_5),
        ("6  low-rank corner rotation", criterion_6),
        ("7  inner limit lower bound", criterion_7),
        ("8  outer limit upper bound and strictness", criterion_8),
        ("9  continuity at constant rank", criterion_9),
        ("10 normal cone inner collapse floor", criterion_10),
        ("11 normal vectors as cluster points", criterion_11),
        ("12 tangent space gap and a-regularity", criterion_12),
        ("13 reproducibility", criterion_13),
        ("-  doubling-N stability", doubling_stability),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {name:<45} {verdict}  ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
