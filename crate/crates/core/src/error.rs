use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("Jacobi SVD did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("rank collapse at power step {step}: R diagonal {diag:e} below threshold {threshold:e}")]
    RankCollapse {
        step: usize,
        diag: f64,
        threshold: f64,
    },

    #[error("top block of V^T Omega is not of full row rank (sigma_min = {sigma_min:e})")]
    RowRankDeficient { sigma_min: f64 },

    #[error("bisection bracket [{lo}, {hi}] does not change sign (g = {g_lo}, {g_hi})")]
    BracketSign {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
