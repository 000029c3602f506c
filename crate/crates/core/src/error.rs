use thiserror::Error;

/// Errors produced by the numerical pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("polynomial is not normalized: {0}")]
    NotNormalized(String),

    #[error("root bracketing failed on monotone branch {branch} (target {target})")]
    BracketFailure { branch: usize, target: f64 },

    #[error("root tolerance not met: residual {residual:e} at {node}")]
    RootTolerance { node: f64, residual: f64 },

    #[error("node cap exceeded: {requested} nodes requested, cap is {cap}")]
    CapExceeded { requested: usize, cap: usize },

    #[error("weight underflow: smallest normalized log-weight {min_log_weight:.1}; use a smaller level or the extended precision build")]
    WeightUnderflow { min_log_weight: f64 },

    #[error("duplicate or unsorted nodes at index {index} (value {value})")]
    DuplicateNodes { index: usize, value: f64 },

    #[error("node spacing {spacing:e} at index {index} is below the collision threshold")]
    NodeCollision { index: usize, spacing: f64 },

    #[error("dyadic intervals overlap at level {level} near {at}")]
    OverlappingIntervals { level: usize, at: f64 },

    #[error("interval does not meet the level-n cover; fall back to the enclosing gap endpoints")]
    EmptyCoverIntersection,

    #[error("resolvent pole: z = {re}+{im}i coincides with an eigenvalue")]
    ResolventPole { re: f64, im: f64 },

    #[error("orthonormal polynomial recurrence overflowed at lambda = {lambda}")]
    RecurrenceOverflow { lambda: f64 },

    #[error("pressure has no sign change on (0, 1]")]
    NoPressureRoot,

    #[error("eigenvalue iteration did not converge for index {index}")]
    NoConvergence { index: usize },

    #[error("spectrum escapes [-1, 1]: eigenvalue {value}")]
    SpectrumOutside { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
