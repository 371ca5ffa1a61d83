use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid rank {r}: require r <= min(m,n) = {max}")]
    InvalidRank { r: usize, max: usize },

    #[error("point rank {r} exceeds variety parameter rbar = {rbar}")]
    RankExceedsVariety { r: usize, rbar: usize },

    #[error("not in cone: {0}")]
    NotInCone(String),

    #[error("matrix rank {rank} exceeds 2k+s = {bound}")]
    RankTooHigh { rank: usize, bound: usize },

    #[error("rank mismatch at index {index}: expected {expected}, found {found}")]
    RankMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("no convergent projector subsequence within tolerance {tol:e}")]
    NoConvergentSubsequence { tol: f64 },

    #[error("rank increment {increment} exceeds available budget {budget}")]
    BudgetExceeded { increment: usize, budget: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
