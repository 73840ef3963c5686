use thiserror::Error;

/// Errors produced anywhere in the reflectometry pipeline.
#[derive(Debug, Error)]
pub enum SfwrError {
    #[error("invalid cable profile: {0}")]
    InvalidProfile(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error("singular reflector: reflection coefficient denominator vanishes at {omega} rad/s")]
    SingularReflector { omega: f64 },

    #[error("segmentation error: acquisition has {got} samples, plan needs {needed}")]
    Segmentation { needed: usize, got: usize },

    #[error("no reflection detected at segment {index} (correlation peak {peak:e} below floor {floor:e})")]
    NoReflection { index: usize, peak: f64, floor: f64 },

    #[error("zero signal: nothing to fit")]
    ZeroSignal,

    #[error("rank-deficient sine fit at {omega} rad/s (regressors collinear or aliased)")]
    RankDeficient { omega: f64 },

    #[error("ill-conditioned sine fit at {omega} rad/s (condition number {condition:e})")]
    IllConditioned { omega: f64, condition: f64 },

    #[error("zero padding insufficient: wrap-around energy fraction {fraction:e} exceeds {tolerance:e}")]
    PaddingInsufficient { fraction: f64, tolerance: f64 },

    #[error("invalid FRF magnitude {value} at {omega} rad/s")]
    InvalidMagnitude { omega: f64, value: f64 },

    #[error("frequency {omega} rad/s not present in propagation table")]
    MissingFrequency { omega: f64 },

    #[error("singular least-squares system: {0}")]
    SingularSystem(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("calibration did not converge: {0}")]
    Calibration(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SfwrError>;
