use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FodError {
    #[error("spherical harmonic order must be even, got {0}")]
    OddOrder(usize),

    #[error("direction ({x}, {y}, {z}) is not unit length (norm {norm})")]
    NonUnitDirection { x: f64, y: f64, z: f64, norm: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("not enough observations: n = {n} must exceed rank {rank}")]
    InsufficientObservations { n: usize, rank: usize },

    #[error("response kernel vanishes at level l = {l} (r_l = {value:e})")]
    DegenerateLevel { l: usize, value: f64 },

    #[error("no voxel passed the response filters (FA > {fa_threshold}, minor ratio < {ratio_threshold})")]
    EmptyResponseSelection {
        fa_threshold: f64,
        ratio_threshold: f64,
    },

    #[error("unknown estimator '{0}'")]
    UnknownEstimator(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FodError>;
