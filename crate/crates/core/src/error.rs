use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular transformation: {0}")]
    SingularTransformation(String),

    #[error("degenerate decay: {0}")]
    DegenerateDecay(String),

    /// `(1 + beta n)^2 + gamma^2 - 4 alpha^2` at or within the rejection margin of zero.
    #[error("above parametric-oscillation threshold (margin {margin:.3e} at n_bar = {n_bar})")]
    AboveThreshold { n_bar: f64, margin: f64 },

    #[error("no steady-state solution: {0}")]
    NoSolution(String),

    #[error("nonlinearity measure undefined for d_bar = 0")]
    UndefinedMeasure,

    #[error("iteration did not converge after {iterations} steps (last iterate {last})")]
    Divergence { iterations: usize, last: Complex64 },

    #[error("resolvent (N - iwI) singular at w = {w}")]
    ResolventSingular { w: f64 },

    #[error("variation system is unstable (max eigenvalue real part {max_real:.3e})")]
    Unstable { max_real: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("reflection phase undefined: denominator |D| = {denominator:.3e}")]
    PhaseUndefined { denominator: f64 },

    #[error("step too large: dt * max|eig| = {product:.3e} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("statistics error: {0}")]
    Statistics(String),
}
