use thiserror::Error;

/// Errors raised by the solvers and model constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("interpolation size {0} is not a power of two")]
    SizeNotPowerOfTwo(usize),

    #[error("matrix is not a contraction: ||B||_inf = {norm}")]
    NotContraction { norm: f64 },

    #[error("degenerate scalar equation: both the quadratic and linear coefficients vanish")]
    DegenerateEquation,

    #[error("null drift: 1 - 2 a1(1) g(1) - a0(1) = {denominator:e}")]
    NullDrift { denominator: f64 },

    #[error("symbol computation needs more than {max_points} interpolation points")]
    MaxPointsExceeded { max_points: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ergodicity violated: rho1 + rho2 = {load} >= 2")]
    ErgodicityViolation { load: f64 },

    #[error("drift condition A_-1 1 > A_1 1 violated: {0}")]
    DriftViolation(String),

    #[error("Sylvester back-substitution residual {residual:e} exceeds {bound:e}")]
    BackSubstitutionFailed { residual: f64, bound: f64 },

    #[error("Sylvester series ran out of exact leading rows of X^n with {rows} rows kept")]
    SeriesBlockExhausted { rows: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("correction block of {entries} entries exceeds the limit of {limit}")]
    CorrectionTooLarge { entries: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
