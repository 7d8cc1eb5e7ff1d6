//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, integrators and experiment drivers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A batch system failed structural validation.
    #[error("invalid batch system: {0}")]
    InvalidSystem(#[from] SystemViolation),

    /// A parameter was outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The initial state is not in the effective domain of a potential.
    #[error("infeasible initial state: {0}")]
    InfeasibleStart(String),

    /// An inner proximal solve did not converge.
    #[error("prox solve failed at t = {time}: residual {residual:.3e} after {iterations} iterations")]
    ProxFailure {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    /// A Newton solve for an implicit step did not converge.
    #[error("Newton solve failed at t = {time}: residual history {residual_history:?}")]
    NewtonFailure {
        time: f64,
        residual_history: Vec<f64>,
    },

    /// An iterative optimizer hit its iteration cap.
    #[error("{solver} did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A polyhedron turned out to be empty at construction.
    #[error("infeasible polyhedron: no point satisfies all {constraints} constraints")]
    EmptyPolyhedron { constraints: usize },

    /// A requested operation is not available for the potential family.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A Monte-Carlo realization failed; carries the realization context.
    #[error("realization {realization} (seed {seed}) failed: {source}")]
    Realization {
        realization: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

/// First violated structural relation of a batch system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemViolation {
    #[error("sub-potential weights sum to {sum}, expected 1 within {tol:.0e}")]
    WeightSum { sum: f64, tol: f64 },
    #[error("batch probabilities sum to {sum}, expected 1 within {tol:.0e}")]
    ProbSum { sum: f64, tol: f64 },
    #[error("batch probability {index} is {value}, must be > 0")]
    NonPositiveProb { index: usize, value: f64 },
    #[error("batch {index} is empty")]
    EmptyBatch { index: usize },
    #[error("batch {batch} references sub-potential index {index} out of range")]
    IndexOutOfRange { batch: usize, index: usize },
    #[error("sub-potential {index} is not covered by any batch")]
    UncoveredIndex { index: usize },
    #[error("weight/probability compatibility fails at sub-potential {index}: p = {weight} but sum of pi_j/|B_j| = {implied}")]
    Compatibility {
        index: usize,
        weight: f64,
        implied: f64,
    },
    #[error("dimension mismatch: sub-potential {index} has dimension {dim}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        dim: usize,
        expected: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
