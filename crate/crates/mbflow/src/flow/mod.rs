//! Batch systems, randomized schedules, flow integrators and the
//! Monte-Carlo error machinery.

mod integrate;
mod mc;
pub mod rng;
mod schedule;
mod trajectory;

pub use integrate::{
    gradient_flow, gradient_flow_at, mini_batch_flow, mini_batch_flow_at, minimizing_movement,
    minimizing_movement_at, FlowOptions,
};
pub use mc::{
    check_epsilon_list, convergence_sweep, expectation_error, expectation_error_with, fit_loglog,
    ConvergenceReport, EpsilonError, ErrorCurve, Scheme, DEGENERATE_SUP_TOL,
};
pub use schedule::{draw_schedule_probs, BatchSchedule};
pub use trajectory::{
    eval_grid, uniform_grid, SchemeTag, Trajectory, TrajectoryMeta, DEFAULT_GRID_NODES,
};

use nalgebra::DVector;

use crate::convex::{l1_min_norm_selection, Potential};
use crate::error::{Error, Result, SystemViolation};

/// Tolerance of the weight, probability and compatibility sums.
pub const SYSTEM_SUM_TOL: f64 = 1e-12;

/// A full potential decomposed into weighted sub-potentials grouped into
/// batches with sampling probabilities.
///
/// The potential is `Phi = sum_i p_i Phi_i`; batch `j` collects the index
/// set `B_j` with probability `pi_j`, and the batch potential is the plain
/// average `Phi_B = |B|^{-1} sum_{i in B} Phi_i`. The compatibility relation
/// `p_i = sum_{j : i in B_j} pi_j / |B_j|` ties the two layers together and
/// makes `sum_j pi_j Phi_{B_j} = Phi`.
#[derive(Debug, Clone)]
pub struct BatchSystem {
    sub_potentials: Vec<Potential>,
    weights: Vec<f64>,
    batches: Vec<Vec<usize>>,
    batch_probs: Vec<f64>,
    batch_pots: Vec<Potential>,
    total: Potential,
}

impl BatchSystem {
    /// Validates the structure and precomputes batch and total potentials.
    /// Batch index sets are 0-based.
    pub fn new(
        sub_potentials: Vec<Potential>,
        weights: Vec<f64>,
        batches: Vec<Vec<usize>>,
        batch_probs: Vec<f64>,
    ) -> Result<Self> {
        if sub_potentials.is_empty() || sub_potentials.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sub-potentials with {} weights",
                sub_potentials.len(),
                weights.len()
            )));
        }
        if batches.len() != batch_probs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} batches with {} probabilities",
                batches.len(),
                batch_probs.len()
            )));
        }
        validate_structure(sub_potentials.len(), &weights, &batches, &batch_probs)?;
        let dim = sub_potentials[0].dim();
        for (i, p) in sub_potentials.iter().enumerate() {
            if p.dim() != dim {
                return Err(SystemViolation::DimensionMismatch {
                    index: i,
                    dim: p.dim(),
                    expected: dim,
                }
                .into());
            }
        }
        let batch_pots = batches
            .iter()
            .map(|b| {
                let w = 1.0 / b.len() as f64;
                let terms: Vec<(f64, &Potential)> =
                    b.iter().map(|&i| (w, &sub_potentials[i])).collect();
                Potential::combine(&terms)
            })
            .collect::<Result<Vec<_>>>()?;
        let terms: Vec<(f64, &Potential)> = weights
            .iter()
            .zip(sub_potentials.iter())
            .map(|(&w, p)| (w, p))
            .collect();
        let total = Potential::combine(&terms)?;
        Ok(Self {
            sub_potentials,
            weights,
            batches,
            batch_probs,
            batch_pots,
            total,
        })
    }

    /// Convenience constructor: one batch per sub-potential, `pi = p`.
    pub fn singleton_batches(sub_potentials: Vec<Potential>, weights: Vec<f64>) -> Result<Self> {
        let batches = (0..sub_potentials.len()).map(|i| vec![i]).collect();
        let probs = weights.clone();
        Self::new(sub_potentials, weights, batches, probs)
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    pub fn num_sub_potentials(&self) -> usize {
        self.sub_potentials.len()
    }

    pub fn num_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn batch_probs(&self) -> &[f64] {
        &self.batch_probs
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn sub_potential(&self, i: usize) -> &Potential {
        &self.sub_potentials[i]
    }

    /// The batch potential `Phi_B_j`.
    pub fn batch_potential(&self, j: usize) -> &Potential {
        &self.batch_pots[j]
    }

    /// The full potential `Phi = sum_i p_i Phi_i`.
    pub fn total_potential(&self) -> &Potential {
        &self.total
    }

    /// Draws the i.i.d. batch index sequence for `[0, T]`.
    pub fn draw_schedule(&self, epsilon: f64, horizon: f64, seed: u64) -> Result<BatchSchedule> {
        draw_schedule_probs(&self.batch_probs, epsilon, horizon, seed)
    }

    /// The coordinated decomposition of the minimal-norm subgradient:
    /// selections `xi_j in dPhi_B_j(u)` with `sum_j pi_j xi_j = dPhi(u)°`.
    ///
    /// One l1 selection `theta*` is chosen from the full potential and
    /// reused inside every batch, which keeps the weighted sum exact even at
    /// kinks. Unavailable for batch systems containing indicators.
    pub fn variance_split(&self, u: &DVector<f64>) -> Result<VarianceSplit> {
        let (g_tot, lambda_tot) = smooth_l1_parts(&self.total, u)?;
        let theta = l1_min_norm_selection(u, &g_tot, lambda_tot);
        let min_norm = &g_tot + &theta * lambda_tot;
        let selections = self
            .batch_pots
            .iter()
            .map(|p| {
                let (g, lambda) = smooth_l1_parts(p, u)?;
                Ok(g + &theta * lambda)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VarianceSplit {
            selections,
            min_norm,
        })
    }

    /// The variance functional
    /// `Lambda(u) = sum_j pi_j ||xi_j(u) - dPhi(u)°||^2`.
    pub fn variance_lambda(&self, u: &DVector<f64>) -> Result<f64> {
        let split = self.variance_split(u)?;
        let mut acc = 0.0;
        for (j, xi) in split.selections.iter().enumerate() {
            acc += self.batch_probs[j] * (xi - &split.min_norm).norm_squared();
        }
        Ok(acc)
    }

    /// Per-example variance `Gamma(u) = sum_i p_i ||zeta_i(u) - dPhi(u)°||^2`
    /// built from per-sub-potential selections with the same coordinated l1
    /// choice. With singleton batches and `pi = p` this is the identical
    /// finite sum as [`Self::variance_lambda`].
    pub fn per_example_gamma(&self, u: &DVector<f64>) -> Result<f64> {
        let (g_tot, lambda_tot) = smooth_l1_parts(&self.total, u)?;
        let theta = l1_min_norm_selection(u, &g_tot, lambda_tot);
        let min_norm = &g_tot + &theta * lambda_tot;
        let mut acc = 0.0;
        for (i, p) in self.sub_potentials.iter().enumerate() {
            let (g, lambda) = smooth_l1_parts(p, u)?;
            let zeta = g + &theta * lambda;
            acc += self.weights[i] * (zeta - &min_norm).norm_squared();
        }
        Ok(acc)
    }
}

/// Per-batch subgradient selections together with the minimal-norm
/// subgradient they average to.
#[derive(Debug, Clone)]
pub struct VarianceSplit {
    pub selections: Vec<DVector<f64>>,
    pub min_norm: DVector<f64>,
}

/// Smooth gradient and l1 coefficient of a potential at `u`.
fn smooth_l1_parts(p: &Potential, u: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    match p {
        Potential::Quadratic(q) => Ok((q.gradient(u), 0.0)),
        Potential::L1 { dim, lambda } => Ok((DVector::zeros(*dim), *lambda)),
        Potential::CompositeQuadL1 { quad, lambda } => Ok((quad.gradient(u), *lambda)),
        Potential::Indicator(_) => Err(Error::Unsupported(
            "variance split is not available for indicator potentials".into(),
        )),
    }
}

/// Checks the structural invariants; returns the first violated relation.
pub fn validate_structure(
    n: usize,
    weights: &[f64],
    batches: &[Vec<usize>],
    batch_probs: &[f64],
) -> std::result::Result<(), SystemViolation> {
    let wsum: f64 = weights.iter().sum();
    if (wsum - 1.0).abs() > SYSTEM_SUM_TOL {
        return Err(SystemViolation::WeightSum {
            sum: wsum,
            tol: SYSTEM_SUM_TOL,
        });
    }
    let psum: f64 = batch_probs.iter().sum();
    if (psum - 1.0).abs() > SYSTEM_SUM_TOL {
        return Err(SystemViolation::ProbSum {
            sum: psum,
            tol: SYSTEM_SUM_TOL,
        });
    }
    for (j, &p) in batch_probs.iter().enumerate() {
        if p <= 0.0 {
            return Err(SystemViolation::NonPositiveProb { index: j, value: p });
        }
    }
    debug_assert_eq!(batches.len(), batch_probs.len());
    let mut covered = vec![false; n];
    for (j, b) in batches.iter().enumerate() {
        if b.is_empty() {
            return Err(SystemViolation::EmptyBatch { index: j });
        }
        for &i in b {
            if i >= n {
                return Err(SystemViolation::IndexOutOfRange { batch: j, index: i });
            }
            covered[i] = true;
        }
    }
    if let Some(i) = covered.iter().position(|&c| !c) {
        return Err(SystemViolation::UncoveredIndex { index: i });
    }
    for i in 0..n {
        let implied: f64 = batches
            .iter()
            .zip(batch_probs.iter())
            .filter(|(b, _)| b.contains(&i))
            .map(|(b, &pi)| pi / b.len() as f64)
            .sum();
        if (implied - weights[i]).abs() > SYSTEM_SUM_TOL {
            return Err(SystemViolation::Compatibility {
                index: i,
                weight: weights[i],
                implied,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn quad1d(h: f64, c: f64) -> Potential {
        Potential::Quadratic(
            QuadraticPotential::new(
                DMatrix::from_element(1, 1, h),
                DVector::from_element(1, c),
                0.0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn single_batch_identity_is_valid() {
        // n = 2, one batch holding both, pi = (1): p_i = 1/2 = pi_1 / |B_1|.
        let sys = BatchSystem::new(
            vec![quad1d(1.0, 0.0), quad1d(2.0, 0.0)],
            vec![0.5, 0.5],
            vec![vec![0, 1]],
            vec![1.0],
        );
        assert!(sys.is_ok());
    }

    #[test]
    fn singleton_batches_with_paper_probabilities_valid() {
        let sys = BatchSystem::new(
            vec![quad1d(1.0, 0.0), quad1d(2.0, 0.0), quad1d(3.0, 0.0)],
            vec![0.5, 0.25, 0.25],
            vec![vec![0], vec![1], vec![2]],
            vec![0.5, 0.25, 0.25],
        );
        assert!(sys.is_ok());
    }

    #[test]
    fn forced_compatibility_mismatch_reported() {
        let err = BatchSystem::new(
            vec![quad1d(1.0, 0.0), quad1d(2.0, 0.0)],
            vec![0.5, 0.5],
            vec![vec![0], vec![1]],
            vec![0.9, 0.1],
        )
        .unwrap_err();
        match err {
            Error::InvalidSystem(SystemViolation::Compatibility { index, .. }) => {
                assert_eq!(index, 0)
            }
            other => panic!("expected compatibility violation, got {other}"),
        }
    }

    #[test]
    fn empty_batch_and_uncovered_index_reported() {
        let v = validate_structure(2, &[0.5, 0.5], &[vec![0, 1], vec![]], &[0.5, 0.5]);
        assert!(matches!(v, Err(SystemViolation::EmptyBatch { index: 1 })));
        let v = validate_structure(3, &[0.4, 0.3, 0.3], &[vec![0], vec![1]], &[0.5, 0.5]);
        assert!(matches!(v, Err(SystemViolation::UncoveredIndex { index: 2 })));
    }

    #[test]
    fn weight_sum_violation_reported_first() {
        let v = validate_structure(2, &[0.5, 0.6], &[vec![0], vec![1]], &[0.5, 0.5]);
        assert!(matches!(v, Err(SystemViolation::WeightSum { .. })));
    }

    #[test]
    fn identical_sub_potentials_have_zero_variance() {
        let sys = BatchSystem::singleton_batches(
            vec![quad1d(1.0, 0.5), quad1d(1.0, 0.5), quad1d(1.0, 0.5)],
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        for u in [-2.0, 0.0, 1.7] {
            let lam = sys.variance_lambda(&DVector::from_element(1, u)).unwrap();
            assert!(lam < 1e-28, "Lambda = {lam}");
        }
    }

    #[test]
    fn constant_gradient_case_matches_hand_sum() {
        // Linear sub-potentials with gradients 0 and 2 under pi = (1/2, 1/2):
        // the mean gradient is 1 and Lambda = 1/2 (0-1)^2 + 1/2 (2-1)^2 = 1.
        let sys = BatchSystem::singleton_batches(
            vec![quad1d(0.0, 0.0), quad1d(0.0, 2.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let lam = sys.variance_lambda(&DVector::from_element(1, 0.3)).unwrap();
        assert!((lam - 1.0).abs() < 1e-15, "Lambda = {lam}");
    }

    #[test]
    fn unbiasedness_of_the_coordinated_split() {
        // Quadratic + l1 system: sum_j pi_j xi_j must reproduce the
        // minimal-norm subgradient exactly, including at kinks.
        let subs = vec![quad1d(2.0, -1.0), Potential::l1(1, 2.0)];
        let sys = BatchSystem::singleton_batches(subs, vec![0.5, 0.5]).unwrap();
        for u in [-1.0, 0.0, 0.25, 3.0] {
            let x = DVector::from_element(1, u);
            let split = sys.variance_split(&x).unwrap();
            let mut mean = DVector::zeros(1);
            for (j, xi) in split.selections.iter().enumerate() {
                mean += xi * sys.batch_probs()[j];
            }
            assert!(
                (mean - &split.min_norm).amax() <= 1e-10,
                "biased split at u = {u}"
            );
        }
    }

    #[test]
    fn singleton_lambda_equals_per_example_gamma_exactly() {
        let subs = vec![quad1d(1.0, 0.3), quad1d(2.0, -0.7), quad1d(0.5, 1.1)];
        let sys = BatchSystem::singleton_batches(subs, vec![1.0 / 4.0, 1.0 / 4.0, 1.0 / 2.0])
            .unwrap();
        for u in [-0.3, 0.0, 2.0] {
            let x = DVector::from_element(1, u);
            let lam = sys.variance_lambda(&x).unwrap();
            let gam = sys.per_example_gamma(&x).unwrap();
            assert_eq!(lam.to_bits(), gam.to_bits(), "u = {u}");
        }
    }
}
