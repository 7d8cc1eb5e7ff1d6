//! Gradient flows of convex potentials, the randomized mini-batch descent
//! flow and randomized minimizing-movement schemes, with Monte-Carlo
//! convergence-order experiments.
//!
//! A full potential `Phi = sum_i p_i Phi_i` is split into batches of
//! sub-potentials drawn i.i.d. with probabilities `pi_j` every `epsilon`
//! time units. The flow that follows the drawn batch potential on each
//! interval approximates the gradient flow of `Phi` in expectation as
//! `epsilon -> 0`, as does the proximal (minimizing-movement) variant; the
//! [`flow`] module measures both effects. Three case studies instantiate
//! the machinery: a constrained quadratic program under projected dynamics
//! ([`qp`]), a sparse inversion problem with exact piecewise dynamics
//! ([`sparse`]) and a randomized domain decomposition for a penalized
//! parabolic obstacle problem ([`obstacle`]).

pub mod convex;
mod error;
pub mod flow;
pub mod obstacle;
pub mod qp;
pub mod sparse;

pub use error::{Error, Result, SystemViolation};
