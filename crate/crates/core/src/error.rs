use thiserror::Error;

/// Errors raised anywhere in the inference pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("lasso did not converge within {iterations} sweeps (max KKT violation {kkt_violation:e})")]
    NonConvergence { iterations: usize, kkt_violation: f64 },

    #[error("rank deficient design: {0}")]
    RankDeficient(String),

    #[error("line misses the polyhedron (V- = {v_minus}, V+ = {v_plus})")]
    EmptySlice { v_minus: f64, v_plus: f64 },

    #[error("component orthogonal to the contrast is incompatible with the polyhedron (V0 = {v_zero})")]
    IncompatibleNu { v_zero: f64 },

    #[error("conditioning event is empty on the line: {0}")]
    EmptyEvent(String),

    #[error("line partition aborted: {0}")]
    Partition(String),

    #[error("truncated Gaussian has no usable mass: {0}")]
    DegenerateSupport(String),

    #[error("observed statistic {z} lies outside its conditioning set (distance {distance:e})")]
    ConditioningViolation { z: f64, distance: f64 },

    #[error("selector failed at z = {z}: {message}")]
    Selector { z: f64, message: String },

    #[error("study aborted: {0}")]
    Study(String),
}

pub type Result<T> = std::result::Result<T, Error>;
