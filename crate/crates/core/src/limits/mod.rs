//! Finite-sequence surrogates for inner and outer limits of cone
//! correspondences.
//!
//! An inner-limit member is certified when its residuals against the cones
//! along a sequence decay like `|X_i - X|` (slope fitted on the first half,
//! validated on the second). Outer-limit members are cluster candidates:
//! averages of tail elements that stay within `CLUSTER_RADIUS` of each
//! other.

mod certify;
mod grassmann;
mod report;
mod suites;

pub use certify::{
    canonical_frame, canonical_member, certify_inner, cluster_candidates, coherent_members,
    index_frames, inner_residual_profile, outer_cluster_check, residual_profile, ClusterCandidate,
    InnerCertificate, OuterCheck, OuterFragment, CLUSTER_RADIUS, CLUSTER_TOL, FLOOR_FACTOR,
    INNER_TOL, TAIL_FRACTION,
};
pub use grassmann::{gap_distance, normal_space, tangent_space, unvec_rows, vec_rows, Subspace};
pub use report::{Clause, LimitReport, ProbeKind, ProbeRecord, ResidualRow, ResidualSummary, Verdict};
pub use suites::{
    polar_limit_check, realize_normal_vector, verify_main_theorem, verify_normal_cone_limits,
    verify_regular_tangent_limits, whitney_a_regularity_check, LimitParams, PolarScenario,
    GAP_TOL, NONMEMBER_FLOOR, PAIRING_TOL,
};
