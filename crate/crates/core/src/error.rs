use thiserror::Error;

use crate::models::Family;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state space too large: more than {cap} allowed configurations")]
    StateSpaceTooLarge { cap: usize },

    #[error("site {site} does not exist in a model with {n_sites} sites")]
    UnknownSite { site: usize, n_sites: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{family} has no Hamiltonian: its interaction is the exclusion rule")]
    NoHamiltonian { family: Family },

    #[error("{operation} is not defined for the {family} family")]
    UnsupportedFamily {
        family: Family,
        operation: &'static str,
    },

    #[error("function must be strictly positive (entry {index} is {value})")]
    NonPositive { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("function is constant: the ratio has a zero denominator")]
    ConstantFunction,

    #[error("quadrature truncation: neglected tail is about {estimate:e}")]
    QuadratureTruncation { estimate: f64 },

    #[error("tail mass bound {bound:e} exceeds tolerance {tolerance:e}: increase n_max")]
    TailTooLarge { bound: f64, tolerance: f64 },

    #[error("time {t} lies beyond the trajectory end {t_end}")]
    BeyondTrajectory { t: f64, t_end: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("all search probes were degenerate (constant functions)")]
    DegenerateSearch,

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
