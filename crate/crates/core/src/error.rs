//! Error type shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside the environment horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error(
        "refinement depth {depth} exhausted: residual bridge variance {residual:.3e} \
         above tolerance {tol:.3e}"
    )]
    ResidualVariance { depth: u8, residual: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("kernel order {required} exceeds cap {cap}; use a smaller time step")]
    KernelOrderExceeded { required: usize, cap: usize },

    #[error("jump budget {n} infeasible on a grid with {slots} jump slots")]
    InfeasibleJumpBudget { n: usize, slots: usize },

    #[error("maximum attained at the top of the r-grid (r = {r_hi}); extend the grid")]
    GridTooShort { r_hi: f64 },

    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),

    #[error("snapshot version {found} unsupported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
