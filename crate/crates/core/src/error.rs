use thiserror::Error;

/// Errors raised by the transport, dynamics and spectral routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("regularization must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("factored axis costs disagree with the full cost at entry ({row}, {col}): {full} vs {factored}")]
    FactorMismatch {
        row: usize,
        col: usize,
        full: f64,
        factored: f64,
    },

    #[error("invalid time horizon [{start}, {end}]")]
    InvalidHorizon { start: f64, end: f64 },

    #[error("system is not controllable over the horizon: Gramian rank {rank} of {dim} (condition number {condition:e})")]
    Uncontrollable {
        rank: usize,
        dim: usize,
        condition: f64,
    },

    #[error("interpolation time must be nonnegative, got {0}")]
    InvalidTau(f64),

    #[error("observation map sends {} grid point(s) outside the observation grid, first: {:?}", .0.len(), .0.first())]
    OutsideObservationGrid(Vec<Vec<f64>>),

    #[error("marginal masses differ: {0} vs {1}")]
    UnequalMass(f64, f64),

    #[error("marginal must be strictly positive and finite (index {0})")]
    NonPositiveMarginal(usize),

    #[error("marginal index {index} out of range for a graph with {count} marginals")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("unsupported pairwise projection ({0}, {1}) for this cost graph")]
    UnsupportedPair(usize, usize),

    #[error("tensor with {0} entries exceeds the brute-force size guard")]
    TensorTooLarge(f64),

    #[error("negative entry {0} in a mass tensor")]
    NegativeMass(f64),

    #[error("invalid scaling state: {0}")]
    InvalidState(String),

    #[error("invalid measurement constraint: {0}")]
    InvalidConstraint(String),

    #[error("Newton system could not be factored (Jacobian not positive definite)")]
    JacobianFactorization,

    #[error("steering vector is singular: point coincides with sensor {0}")]
    SingularSteering(usize),

    #[error("covariance matrix is singular after diagonal loading")]
    SingularCovariance,

    #[error("invalid sensor array: {0}")]
    InvalidArray(String),
}

pub type Result<T> = std::result::Result<T, Error>;
