use thiserror::Error;

/// Errors raised by the q-algebra kernel, the distribution model and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid entropic index q = {0}")]
    InvalidQ(f64),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("negative density at index {index}: {value}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("density not normalized: integral = {mass}")]
    NotNormalized { mass: f64 },

    #[error("distributions live on different grids")]
    GridMismatch,

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(&'static str),

    #[error("absolute continuity violated at index {index}: p > 0 where r = 0")]
    AbsoluteContinuity { index: usize },

    #[error("density collapsed to zero under the Tsallis cut-off")]
    CutoffCollapse,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("targets appear infeasible: residual stalled at {residual:e}")]
    Infeasible { residual: f64 },

    #[error("fixed-point iteration oscillates (damping floor reached after {iterations} iterations)")]
    Oscillation { iterations: usize },

    #[error("expectation matching degenerate: 1 - (1-q) I(l||p) = {denominator}")]
    MatchingDegenerate { denominator: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = core::result::Result<T, Error>;
