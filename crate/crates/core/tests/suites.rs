use lowrank_cones::cones::{cone_frame, random_member, ConeKind, ConeSpec};
use lowrank_cones::exec::Execution;
use lowrank_cones::limits::*;
use lowrank_cones::matcore::{columns, diag_rect};
use lowrank_cones::seqlab::{dense_cluster_sequence, planted_cluster_sequence, random_point};
use lowrank_cones::{Error, Matrix, RandomSource};

fn params(p: (usize, usize, usize, usize, usize)) -> LimitParams {
    LimitParams::new(p.0, p.1, p.2, p.3, p.4)
}

fn names(r: &LimitReport) -> Vec<&str> {
    r.clauses.iter().map(|c| c.name.as_str()).collect()
}

#[test]
fn main_theorem_fixture_passes() {
    let r = verify_main_theorem(params((4, 4, 1, 2, 2)), 20, 200, &RandomSource::new(0), Execution::default()).unwrap();
    assert_eq!(names(&r), ["inner_lower_bound", "outer_upper_bound", "strict_inclusion", "negative_control"]);
    assert!(r.clauses.iter().all(|c| c.verdict == Verdict::Pass), "{}", r.to_json().unwrap());
    assert_eq!(r.seed, 0);
    assert_eq!(r.trials, 20);
    assert!(r.note.contains("constructed sequences"));
}

#[test]
fn constant_rank_regime_uses_continuity() {
    let r = verify_main_theorem(params((4, 4, 2, 2, 2)), 5, 200, &RandomSource::new(1), Execution::default()).unwrap();
    assert!(r.passed());
    assert!(r.clause("continuity").is_some());
    assert!(r.clause("strict_inclusion").is_none());
}

#[test]
fn whole_space_upper_cone_is_vacuous() {
    let r = verify_main_theorem(params((5, 6, 1, 3, 3)), 4, 200, &RandomSource::new(2), Execution::default()).unwrap();
    assert_eq!(r.clause("outer_upper_bound").unwrap().verdict, Verdict::Vacuous);
    assert!(r.passed());
    assert!(r.to_json().unwrap().contains("\"vacuous\""));
}

#[test]
fn regular_tangent_strictness_and_lower_bound() {
    let r = verify_regular_tangent_limits(params((5, 5, 1, 2, 3)), 6, 200, &RandomSource::new(3), Execution::default()).unwrap();
    assert!(r.passed(), "{}", r.to_json().unwrap());
    let strict = r.clause("strict_inclusion").unwrap();
    for t in 0..6 {
        assert!(strict.probes.iter().any(|p| p.trial == t && p.distance.unwrap() <= 1e-6 * p.norm.max(1.0)));
    }
}

#[test]
fn regular_normal_residual_is_constant_below_rbar() {
    let mut rng = RandomSource::new(4);
    let x = random_point(5, 5, 1, &mut rng);
    let tf = cone_frame(&x, 1e-9).unwrap();
    let b = dense_cluster_sequence(&x, 2, 50, &RandomSource::new(5)).unwrap();
    let nu = random_member(&tf, &ConeSpec::new(ConeKind::ClarkeNormal, 3), &mut rng).unwrap();
    let res = inner_residual_profile(&b, &ConeSpec::new(ConeKind::RegularNormal, 3), &nu).unwrap();
    assert!(res.iter().all(|r| (r - nu.norm()).abs() <= 1e-12 * nu.norm()));
}

#[test]
fn normal_suite_passes_and_records_floors() {
    let r = verify_normal_cone_limits(params((4, 4, 1, 2, 2)), 5, 200, &RandomSource::new(6), Execution::default()).unwrap();
    assert_eq!(names(&r), ["inner_collapse", "cluster_recovery", "clarke_outer_limit"]);
    assert!(r.passed(), "{}", r.to_json().unwrap());
    let collapse = r.clause("inner_collapse").unwrap();
    for p in collapse.probes.iter().filter(|p| p.kind == ProbeKind::NegativeControl) {
        assert_eq!(p.certified, Some(false));
        assert!(p.floor.unwrap() > FLOOR_FACTOR * INNER_TOL);
    }
}

#[test]
fn rank_one_normal_vector_is_a_cluster_point() {
    let (m, n, r) = (4, 5, 2);
    let mut rng = RandomSource::new(7);
    let x = random_point(m, n, 1, &mut rng);
    let tf = cone_frame(&x, 1e-9).unwrap();
    // u_perp w_perp^T: rank min(m,n) - rbar = 1 with rbar = 3
    let nu = columns(&tf.u_perp, 1, 1) * columns(&tf.v_perp, 2, 1).transpose() * 2.5;
    let (p, q, a) = realize_normal_vector(&tf, &nu, r).unwrap();
    let b = planted_cluster_sequence(&x, r, 200, &[(p, q)], &RandomSource::new(8)).unwrap();
    let seq: Vec<Matrix> = b.frames.iter().map(|f| &f.u_perp * &a * f.v_perp.transpose()).collect();
    let best = cluster_candidates(&seq, TAIL_FRACTION, CLUSTER_RADIUS)
        .iter()
        .map(|c| (&c.center - &nu).norm())
        .fold(f64::INFINITY, f64::min);
    assert!(best <= 1e-6, "{best}");
}

#[test]
fn normal_vector_beyond_budget_is_rejected() {
    let mut rng = RandomSource::new(9);
    let x = random_point(4, 4, 1, &mut rng);
    let tf = cone_frame(&x, 1e-9).unwrap();
    let nu = &tf.u_perp * diag_rect(3, 3, &[1.0, 1.0, 1.0]) * tf.v_perp.transpose();
    assert!(matches!(realize_normal_vector(&tf, &nu, 2), Err(Error::NotInCone(_))));
}

#[test]
fn whitney_examples() {
    let r = whitney_a_regularity_check(params((4, 4, 1, 2, 2)), 200, 4, &RandomSource::new(10), Execution::default()).unwrap();
    assert!(r.passed(), "{}", r.to_json().unwrap());
    for p in &r.clause("gap_convergence").unwrap().probes {
        assert!(p.distance.unwrap() <= GAP_TOL);
    }
    for p in &r.clause("negative_control").unwrap().probes {
        assert_eq!(p.certified, Some(false));
    }
}

#[test]
fn polar_scenarios() {
    let r = polar_limit_check(params((4, 5, 1, 2, 2)), 3, 150, &RandomSource::new(11), Execution::default()).unwrap();
    assert!(r.passed(), "{}", r.to_json().unwrap());
    for s in PolarScenario::ALL {
        assert!(r.clause(&format!("{}.inner_of_polars", s.name())).is_some());
        assert!(r.clause(&format!("{}.outer_of_polars", s.name())).is_some());
    }
    let same_rank = polar_limit_check(params((4, 5, 2, 2, 2)), 2, 100, &RandomSource::new(11), Execution::default()).unwrap();
    assert!(same_rank.passed());
    assert!(same_rank.clause("decreasing_rank_tangent_spaces.inner_of_polars").is_none());
}

#[test]
fn every_suite_has_a_rejected_negative_control() {
    let rng = RandomSource::new(12);
    let p = params((4, 4, 1, 2, 2));
    let e = Execution::default();
    let reports = [
        verify_main_theorem(p, 2, 100, &rng, e).unwrap(),
        verify_regular_tangent_limits(p, 2, 100, &rng, e).unwrap(),
        verify_normal_cone_limits(p, 2, 100, &rng, e).unwrap(),
        whitney_a_regularity_check(p, 100, 2, &rng, e).unwrap(),
        polar_limit_check(p, 2, 100, &rng, e).unwrap(),
    ];
    for r in &reports {
        let negatives: Vec<_> = r
            .clauses
            .iter()
            .flat_map(|c| &c.probes)
            .filter(|p| p.kind == ProbeKind::NegativeControl)
            .collect();
        assert!(!negatives.is_empty(), "{}", r.suite);
        assert!(negatives.iter().all(|p| p.certified == Some(false)), "{}", r.suite);
    }
}

#[test]
fn parameter_validation() {
    let rng = RandomSource::new(0);
    let e = Execution::Sequential;
    assert!(matches!(
        verify_main_theorem(params((4, 4, 1, 3, 2)), 1, 20, &rng, e),
        Err(Error::RankExceedsVariety { r: 3, rbar: 2 })
    ));
    for bad in [(4, 4, 1, 2, 4), (4, 4, 0, 2, 2), (4, 4, 3, 2, 3)] {
        assert!(matches!(verify_normal_cone_limits(params(bad), 1, 20, &rng, e), Err(Error::InvalidParams(_))));
    }
    let Err(Error::InvalidParams(msg)) = verify_main_theorem(params((3, 5, 1, 2, 3)), 1, 20, &rng, e) else {
        panic!("expected InvalidParams");
    };
    assert!(msg.contains("require r̄ < min(m,n)"));
    assert!(whitney_a_regularity_check(params((4, 4, 2, 2, 2)), 20, 1, &rng, e).is_err());
    assert!(verify_main_theorem(params((4, 4, 1, 2, 2)), 0, 20, &rng, e).is_err());
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r = verify_main_theorem(params((4, 4, 1, 2, 2)), 2, 60, &RandomSource::new(13), Execution::default()).unwrap();
    let (json, csv) = r.write_files(dir.path(), "main").unwrap();
    let back: LimitReport = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(back.clauses, r.clauses);
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("index,probe_id,residual\n"));
    assert_eq!(table.lines().count(), r.residual_table.len() + 1);
}
