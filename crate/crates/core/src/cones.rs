//! Frames and the five tangent/normal cones of `R_{<=rbar}` at a point of
//! rank `r`.
//!
//! Every cone is described in the block coordinates of a frame
//! `[U U_perp]`, `[V V_perp]` at `X`:
//!
//! ```text
//! eta = [U U_perp] [A B; C D] [V V_perp]^T
//! ```
//!
//! | kind             | condition                                        |
//! |------------------|--------------------------------------------------|
//! | `Tangent`        | `rank D <= rbar - r`                             |
//! | `RegularTangent` | `D = 0`                                          |
//! | `Normal`         | `A, B, C = 0`, `rank D <= min(m,n) - rbar`       |
//! | `RegularNormal`  | `{0}` if `r < rbar`, else `A, B, C = 0`          |
//! | `ClarkeNormal`   | `A, B, C = 0`                                    |
//!
//! Because the four blocks are orthogonal coordinates, metric projection onto
//! any of these cones acts blockwise: keep or zero `A, B, C`, and truncate
//! `D` to its rank budget.
//!
//! `rbar >= min(m, n)` is accepted and means the whole space: tangent cones
//! are everything and normal cones are `{0}`.

use crate::matcore::{
    block2x2, check_finite, check_shape, columns, hcat, inner, orth_complement, svd_full, Matrix,
    RandomSource,
};
use crate::variety::{numerical_rank, numerical_rank_scaled, truncate_rank};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Pairing tolerance for polarity checks, relative to `|eta| |nu|`.
pub const POLAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ConeFrame {
    pub x: Matrix,
    pub r: usize,
    pub u: Matrix,
    pub u_perp: Matrix,
    pub v: Matrix,
    pub v_perp: Matrix,
    pub sigma: Vec<f64>,
}

impl ConeFrame {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn min_dim(&self) -> usize {
        self.rows().min(self.cols())
    }

    /// `[U U_perp]`.
    pub fn left(&self) -> Matrix {
        hcat(self.rows(), &[&self.u, &self.u_perp])
    }

    /// `[V V_perp]`.
    pub fn right(&self) -> Matrix {
        hcat(self.cols(), &[&self.v, &self.v_perp])
    }

    /// Frame with the complements replaced by `U_perp P` and `V_perp Q`.
    pub fn rotate_complements(&self, p: &Matrix, q: &Matrix) -> ConeFrame {
        ConeFrame {
            u_perp: &self.u_perp * p,
            v_perp: &self.v_perp * q,
            ..self.clone()
        }
    }

    /// Frame from explicit bases. `u`, `v` must span the column and row
    /// spaces of `x`; the complements are completed when omitted.
    pub fn from_bases(
        x: &Matrix,
        u: Matrix,
        u_perp: Option<Matrix>,
        v: Matrix,
        v_perp: Option<Matrix>,
    ) -> Result<ConeFrame> {
        check_finite(x)?;
        let r = u.ncols();
        if v.ncols() != r || u.nrows() != x.nrows() || v.nrows() != x.ncols() {
            return Err(Error::InvalidInput("frame bases do not match the point".into()));
        }
        let u_perp = match u_perp {
            Some(w) => w,
            None => orth_complement(&u)?,
        };
        let v_perp = match v_perp {
            Some(w) => w,
            None => orth_complement(&v)?,
        };
        let core = u.transpose() * x * &v;
        let sigma = (0..r).map(|i| core[(i, i)]).collect();
        Ok(ConeFrame {
            x: x.clone(),
            r,
            u,
            u_perp,
            v,
            v_perp,
            sigma,
        })
    }

    /// Residuals of the frame invariants: orthogonality of `[U U_perp]` and
    /// `[V V_perp]`, and how far `X` leaks out of `U ... V^T`.
    pub fn residuals(&self) -> FrameResiduals {
        let (m, n) = self.x.shape();
        let l = self.left();
        let rt = self.right();
        FrameResiduals {
            left_orth: (l.transpose() * &l - Matrix::identity(m, m)).norm(),
            right_orth: (rt.transpose() * &rt - Matrix::identity(n, n)).norm(),
            core: (self.u.transpose() * &self.x * &self.v
                - crate::matcore::diag(&self.sigma))
            .norm(),
            left_leak: (self.u_perp.transpose() * &self.x).norm(),
            right_leak: (&self.x * &self.v_perp).norm(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrameResiduals {
    pub left_orth: f64,
    pub right_orth: f64,
    pub core: f64,
    pub left_leak: f64,
    pub right_leak: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        [
            self.left_orth,
            self.right_orth,
            self.core,
            self.left_leak,
            self.right_leak,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// SVD frame at `x` with rank decided at relative tolerance `tol`.
pub fn cone_frame(x: &Matrix, tol: f64) -> Result<ConeFrame> {
    check_finite(x)?;
    let (m, n) = x.shape();
    let f = svd_full(x)?;
    let r = numerical_rank(x, tol);
    Ok(ConeFrame {
        x: x.clone(),
        r,
        u: columns(&f.u, 0, r),
        u_perp: columns(&f.u, r, m - r),
        v: columns(&f.v, 0, r),
        v_perp: columns(&f.v, r, n - r),
        sigma: f.sigma[..r].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Tangent,
    RegularTangent,
    Normal,
    RegularNormal,
    ClarkeNormal,
}

impl ConeKind {
    pub const ALL: [ConeKind; 5] = [
        ConeKind::Tangent,
        ConeKind::RegularTangent,
        ConeKind::Normal,
        ConeKind::RegularNormal,
        ConeKind::ClarkeNormal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConeKind::Tangent => "tangent",
            ConeKind::RegularTangent => "regular_tangent",
            ConeKind::Normal => "normal",
            ConeKind::RegularNormal => "regular_normal",
            ConeKind::ClarkeNormal => "clarke_normal",
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(
            self,
            ConeKind::Normal | ConeKind::RegularNormal | ConeKind::ClarkeNormal
        )
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ConeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ConeKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Parse(format!("unknown cone kind {s:?}")))
    }
}

/// A cone kind together with the variety parameter `rbar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub rbar: usize,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, rbar: usize) -> Self {
        Self { kind, rbar }
    }

    pub fn tangent(rbar: usize) -> Self {
        Self::new(ConeKind::Tangent, rbar)
    }
}

/// The four blocks of `eta` in a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl BlockDecomposition {
    pub fn zeros(frame: &ConeFrame) -> Self {
        let (m, n, r) = (frame.rows(), frame.cols(), frame.r);
        Self {
            a: Matrix::zeros(r, r),
            b: Matrix::zeros(r, n - r),
            c: Matrix::zeros(m - r, r),
            d: Matrix::zeros(m - r, n - r),
        }
    }

    /// `[U U_perp] [A B; C D] [V V_perp]^T`.
    pub fn assemble(&self, frame: &ConeFrame) -> Matrix {
        frame.left() * block2x2(&self.a, &self.b, &self.c, &self.d) * frame.right().transpose()
    }

    pub fn abc_norm(&self) -> f64 {
        (self.a.norm_squared() + self.b.norm_squared() + self.c.norm_squared()).sqrt()
    }
}

pub fn decompose(frame: &ConeFrame, eta: &Matrix) -> Result<BlockDecomposition> {
    check_shape(eta, frame.rows(), frame.cols(), "eta")?;
    let ut_eta = frame.u.transpose() * eta;
    let upt_eta = frame.u_perp.transpose() * eta;
    Ok(BlockDecomposition {
        a: &ut_eta * &frame.v,
        b: &ut_eta * &frame.v_perp,
        c: &upt_eta * &frame.v,
        d: &upt_eta * &frame.v_perp,
    })
}

/// Effective shape of a cone at a frame after validating `r <= rbar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Whole,
    Zero,
    /// Keep `A, B, C` or not; `D` limited to rank `d_budget` (`None` = free).
    Blocks { keep_abc: bool, d_budget: Option<usize> },
}

fn shape(frame: &ConeFrame, spec: &ConeSpec) -> Result<Shape> {
    let r = frame.r;
    let rbar = spec.rbar;
    if r > rbar {
        return Err(Error::RankExceedsVariety { r, rbar });
    }
    let k = frame.min_dim();
    if rbar >= k {
        return Ok(if spec.kind.is_normal() {
            Shape::Zero
        } else {
            Shape::Whole
        });
    }
    Ok(match spec.kind {
        ConeKind::Tangent => Shape::Blocks {
            keep_abc: true,
            d_budget: Some(rbar - r),
        },
        ConeKind::RegularTangent => Shape::Blocks {
            keep_abc: true,
            d_budget: Some(0),
        },
        ConeKind::Normal => Shape::Blocks {
            keep_abc: false,
            d_budget: Some(k - rbar),
        },
        ConeKind::RegularNormal if r < rbar => Shape::Zero,
        ConeKind::RegularNormal | ConeKind::ClarkeNormal => Shape::Blocks {
            keep_abc: false,
            d_budget: None,
        },
    })
}

/// Rank budget of the `D` block for `spec` at `frame` (`None` when free).
pub fn d_budget(frame: &ConeFrame, spec: &ConeSpec) -> Result<Option<usize>> {
    Ok(match shape(frame, spec)? {
        Shape::Whole => None,
        Shape::Zero => Some(0),
        Shape::Blocks { d_budget, .. } => d_budget,
    })
}

pub fn cone_membership(frame: &ConeFrame, spec: &ConeSpec, eta: &Matrix, tol: f64) -> Result<bool> {
    let sh = shape(frame, spec)?;
    check_shape(eta, frame.rows(), frame.cols(), "eta")?;
    let scale = eta.norm().max(1.0);
    Ok(match sh {
        Shape::Whole => true,
        Shape::Zero => eta.norm() <= tol,
        Shape::Blocks { keep_abc, d_budget } => {
            let blocks = decompose(frame, eta)?;
            let abc_ok = keep_abc || blocks.abc_norm() <= tol * scale;
            let d_ok = match d_budget {
                None => true,
                Some(0) => blocks.d.norm() <= tol * scale,
                Some(budget) => numerical_rank_scaled(&blocks.d, tol, scale) <= budget,
            };
            abc_ok && d_ok
        }
    })
}

/// Metric (Frobenius) projection of `eta` onto the cone.
pub fn project_cone(frame: &ConeFrame, spec: &ConeSpec, eta: &Matrix) -> Result<Matrix> {
    let sh = shape(frame, spec)?;
    check_shape(eta, frame.rows(), frame.cols(), "eta")?;
    Ok(match sh {
        Shape::Whole => eta.clone(),
        Shape::Zero => Matrix::zeros(eta.nrows(), eta.ncols()),
        Shape::Blocks { keep_abc, d_budget } => {
            let mut blocks = decompose(frame, eta)?;
            if !keep_abc {
                blocks.a.fill(0.0);
                blocks.b.fill(0.0);
                blocks.c.fill(0.0);
            }
            if let Some(budget) = d_budget {
                let budget = budget.min(blocks.d.nrows().min(blocks.d.ncols()));
                blocks.d = truncate_rank(&blocks.d, budget)?;
            }
            blocks.assemble(frame)
        }
    })
}

pub fn cone_distance(frame: &ConeFrame, spec: &ConeSpec, eta: &Matrix) -> Result<f64> {
    Ok((eta - project_cone(frame, spec, eta)?).norm())
}

/// Random member of the cone: Gaussian blocks, with `D` of the full rank
/// budget.
pub fn random_member(frame: &ConeFrame, spec: &ConeSpec, rng: &mut RandomSource) -> Result<Matrix> {
    let (m, n) = (frame.rows(), frame.cols());
    Ok(match shape(frame, spec)? {
        Shape::Whole => rng.gaussian(m, n),
        Shape::Zero => Matrix::zeros(m, n),
        Shape::Blocks { keep_abc, d_budget } => {
            let mut blocks = BlockDecomposition::zeros(frame);
            if keep_abc {
                blocks.a = rng.gaussian(blocks.a.nrows(), blocks.a.ncols());
                blocks.b = rng.gaussian(blocks.b.nrows(), blocks.b.ncols());
                blocks.c = rng.gaussian(blocks.c.nrows(), blocks.c.ncols());
            }
            let (p, q) = blocks.d.shape();
            let k = d_budget.unwrap_or(p.min(q)).min(p.min(q));
            blocks.d = rng.gaussian_rank(p, q, k);
            blocks.assemble(frame)
        }
    })
}

/// Polarity check between a primal tangent vector and a normal vector.
///
/// `RegularTangent` pairs with `ClarkeNormal` (and the smaller `Normal`);
/// `Tangent` pairs with `RegularNormal`. The kind of `eta` is implied by
/// `nu_spec.kind`. Returns whether `<eta, nu> <= POLAR_TOL |eta| |nu|`.
pub fn polar_pairing_check(
    frame: &ConeFrame,
    eta: &Matrix,
    nu_spec: &ConeSpec,
    nu: &Matrix,
) -> Result<bool> {
    let primal = match nu_spec.kind {
        ConeKind::ClarkeNormal | ConeKind::Normal => ConeKind::RegularTangent,
        ConeKind::RegularNormal => ConeKind::Tangent,
        other => {
            return Err(Error::InvalidInput(format!(
                "{other} is not a normal cone kind"
            )))
        }
    };
    let primal_spec = ConeSpec::new(primal, nu_spec.rbar);
    if !cone_membership(frame, &primal_spec, eta, POLAR_TOL)? {
        return Err(Error::NotInCone(format!("eta is not in the {primal} cone")));
    }
    if !cone_membership(frame, nu_spec, nu, POLAR_TOL)? {
        return Err(Error::NotInCone(format!("nu is not in the {} cone", nu_spec.kind)));
    }
    Ok(inner(eta, nu) <= POLAR_TOL * eta.norm() * nu.norm())
}
