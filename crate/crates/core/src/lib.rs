//! Tangent and normal cone calculus for the real determinantal variety
//! `R_{<=r}^{m x n}` of matrices of rank at most `r`.
//!
//! The crate is organised bottom-up:
//!
//! - [`matcore`]: dense kernel (SVD, pseudoinverse, orthogonal complements,
//!   Haar sampling, matrix text format).
//! - [`variety`]: numerical rank, distance and best low-rank approximation.
//! - [`cones`]: frames at a point and the five tangent/normal cones
//!   (membership, metric projection, distance, polarity).
//! - [`blockrank`]: rank bounds and rotations for 2x2 block matrices.
//! - [`seqlab`]: constructive matrix sequences and frame alignment along them.
//! - [`limits`]: sampled inner/outer limit certification and the
//!   verification harness that produces [`limits::LimitReport`]s.
//!
//! Trial-level work in the harness runs on rayon when the `parallel`
//! feature is enabled (the default); see [`exec`].

pub mod blockrank;
pub mod cones;
mod error;
pub mod exec;
pub mod limits;
pub mod matcore;
pub mod seqlab;
pub mod variety;

pub use error::{Error, Result};
pub use matcore::{Matrix, RandomSource, SvdFactors};

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
