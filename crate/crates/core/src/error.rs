use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{0}` must be strictly positive")]
    NonPositiveParameter(&'static str),
    #[error("spatial dimension must lie in 1..=3, got {0}")]
    BadDimension(usize),
    #[error("grid of {got} points per dimension cannot resolve this field (need at least {required})")]
    GridTooCoarse { required: usize, got: usize },
    #[error("truncation N = {n} misses unstable modes: N^2 < q_c^2 = {q2_critical}")]
    TruncationTooSmall { n: usize, q2_critical: f64 },
    #[error("spectrum (N = {spectrum_n}, d = {spectrum_d}) does not cover field (N = {field_n}, d = {field_d})")]
    SpectrumMismatch {
        spectrum_n: usize,
        spectrum_d: usize,
        field_n: usize,
        field_d: usize,
    },
    #[error("fields have different shapes")]
    ShapeMismatch,
    #[error("numerical contradiction: {0}")]
    NumericalContradiction(String),
    #[error("eigenvectors of mode with q^2 = {q2} are numerically dependent")]
    DegenerateEigenbasis { q2: usize },
    #[error("growth exponent {exponent} exceeds the overflow guard")]
    Overflow { exponent: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("non-finite or blown-up state at t = {time}")]
    NonFinite { time: f64 },
    #[error("solution blew up; last finite state at t = {last_good_time}")]
    BlowUp { last_good_time: f64 },
    #[error("trajectory sampling too coarse for quadrature step {quad_dt}")]
    InsufficientSamples { quad_dt: f64 },
    #[error("homogeneous state is linearly stable (lambda_max = {lambda_max})")]
    StableRegime { lambda_max: f64 },
    #[error("amplitude delta = {delta} must satisfy 0 < delta < theta = {theta}")]
    BadAmplitude { delta: f64, theta: f64 },
    #[error("initial datum must have unit L2 norm, got {0}")]
    NotNormalized(f64),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}
