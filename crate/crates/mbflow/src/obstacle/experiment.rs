//! Randomized domain-decomposition experiment: reference penalized scheme
//! against the randomized minimizing movement, with Monte-Carlo error
//! statistics over a decreasing epsilon list.

use nalgebra::DVector;

use crate::error::Result;
use crate::flow::{
    check_epsilon_list, eval_grid, expectation_error_with, BatchSchedule, ConvergenceReport,
    ErrorCurve,
};
use crate::obstacle::{Grid2D, ImplicitStepper, ObstacleSpec, PartitionOfUnity, WeightedLaplacian};

/// A randomized domain-decomposition setup: one weight grid per batch and
/// the batch probabilities.
///
/// Built from a partition of unity with singleton batches by default; the
/// zero-variance variant gives every batch the full operator, which makes
/// every realization coincide with the reference scheme.
pub struct DdExperiment {
    grid: Grid2D,
    spec: ObstacleSpec,
    batch_weights: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

impl DdExperiment {
    /// Singleton batches over the four subdomains with uniform
    /// probabilities; sub-potential `i` carries its `1/p_i` scaling so the
    /// probability-weighted batch operators average to the full Laplacian.
    pub fn singleton(grid: Grid2D, spec: ObstacleSpec, partition: &PartitionOfUnity) -> Self {
        let m = partition.num_subdomains();
        let p = vec![1.0 / m as f64; m];
        let batch_weights = (0..m)
            .map(|i| partition.batch_weight(&[i], &p))
            .collect();
        Self {
            grid,
            spec,
            batch_weights,
            pi: p,
        }
    }

    /// Every batch sees the full operator: zero-variance configuration.
    pub fn zero_variance(grid: Grid2D, spec: ObstacleSpec, batches: usize) -> Self {
        let batch_weights = (0..batches)
            .map(|_| vec![1.0; grid.full_len()])
            .collect();
        Self {
            grid,
            spec,
            batch_weights,
            pi: vec![1.0 / batches as f64; batches],
        }
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn spec(&self) -> &ObstacleSpec {
        &self.spec
    }

    /// One proximal step of the batch potential: implicit solve of the
    /// weighted operator with the penalty kept un-randomized.
    pub fn dd_minimizing_step(
        &self,
        state: &DVector<f64>,
        batch: usize,
        epsilon: f64,
        t: f64,
    ) -> Result<DVector<f64>> {
        let op = WeightedLaplacian::new(self.grid, self.batch_weights[batch].clone())?;
        ImplicitStepper::new(&self.grid, &self.spec, &op, epsilon).step(state, t)
    }

    /// Reference trajectory: backward Euler with the full operator and step
    /// `h_ref`, sampled at the requested times (shortened steps land on
    /// them exactly).
    pub fn reference_at(&self, times: &[f64], h_ref: f64) -> Result<Vec<DVector<f64>>> {
        let op = WeightedLaplacian::laplacian(self.grid);
        let mut out = Vec::with_capacity(times.len());
        let mut t = 0.0;
        let mut u = self.spec.u0.clone();
        let mut steppers: Vec<(f64, ImplicitStepper)> = Vec::new();
        for &target in times {
            while t < target {
                let dt = h_ref.min(target - t);
                let stepper = match steppers.iter_mut().find(|(tau, _)| *tau == dt) {
                    Some((_, s)) => s,
                    None => {
                        steppers.push((dt, ImplicitStepper::new(&self.grid, &self.spec, &op, dt)));
                        &mut steppers.last_mut().expect("just pushed").1
                    }
                };
                u = stepper.step(&u, t)?;
                t += dt;
            }
            out.push(u.clone());
        }
        Ok(out)
    }

    /// Minimizing-movement staircase under a schedule, sampled at the
    /// requested times (piecewise constant, value `w_{k+1}` on
    /// `[k eps, (k+1) eps)`).
    pub fn realization_at(
        &self,
        schedule: &BatchSchedule,
        times: &[f64],
    ) -> Result<Vec<DVector<f64>>> {
        let eps = schedule.epsilon;
        let mut steppers: Vec<Option<ImplicitStepper>> =
            (0..self.batch_weights.len()).map(|_| None).collect();
        let mut out = Vec::with_capacity(times.len());
        let mut w = self.spec.u0.clone();
        let mut next = 0usize;
        for (k, &j) in schedule.indices.iter().enumerate() {
            let t_start = k as f64 * eps;
            if steppers[j].is_none() {
                let op = WeightedLaplacian::new(self.grid, self.batch_weights[j].clone())?;
                steppers[j] = Some(ImplicitStepper::new(&self.grid, &self.spec, &op, eps));
            }
            w = steppers[j]
                .as_mut()
                .expect("stepper built")
                .step(&w, t_start)?;
            let t_end = (k + 1) as f64 * eps;
            while next < times.len() && times[next] < t_end {
                out.push(w.clone());
                next += 1;
            }
            if next >= times.len() {
                break;
            }
        }
        while next < times.len() {
            out.push(w.clone());
            next += 1;
        }
        Ok(out)
    }

    /// Monte-Carlo mean squared L2 error of the randomized scheme against
    /// the reference at one epsilon.
    pub fn expectation_error(
        &self,
        epsilon: f64,
        realizations: usize,
        base_seed: u64,
        h_ref: f64,
        nodes: usize,
    ) -> Result<ErrorCurve> {
        let horizon = self.spec.horizon;
        let times = eval_grid(horizon, epsilon, nodes);
        let reference = self.reference_at(&times, h_ref)?;
        let h = self.grid.spacing();
        expectation_error_with(
            &times,
            &reference,
            &self.pi,
            epsilon,
            horizon,
            realizations,
            base_seed,
            h * h,
            |schedule| self.realization_at(schedule, &times),
        )
    }
}

/// Full convergence study over a decreasing epsilon list.
pub fn run_dd_experiment(
    experiment: &DdExperiment,
    epsilons: &[f64],
    realizations: usize,
    base_seed: u64,
    h_ref: f64,
    nodes: usize,
) -> Result<ConvergenceReport> {
    check_epsilon_list(epsilons)?;
    let curves = epsilons
        .iter()
        .map(|&eps| experiment.expectation_error(eps, realizations, base_seed, h_ref, nodes))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::assemble(
        curves,
        epsilons,
        realizations,
        base_seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::{build_partition, penalized_step};

    fn small_setup() -> (Grid2D, ObstacleSpec, PartitionOfUnity) {
        let grid = Grid2D::new(8).unwrap();
        let spec = ObstacleSpec {
            horizon: 0.25,
            ..ObstacleSpec::example(&grid)
        };
        let partition = build_partition(&grid, 0.1).unwrap();
        (grid, spec, partition)
    }

    #[test]
    fn full_batch_step_equals_penalized_step_exactly() {
        // The full-batch weight is exactly one at every node, so the two
        // code paths assemble bitwise identical systems.
        let (grid, spec, partition) = small_setup();
        let exp = DdExperiment {
            grid,
            spec: spec.clone(),
            batch_weights: vec![partition.batch_weight(&[0, 1, 2, 3], &[0.25; 4])],
            pi: vec![1.0],
        };
        let state = grid.eval_interior(|x, y| -0.05 * (1.0 - x * x) * (1.0 - y * y));
        let a = exp.dd_minimizing_step(&state, 0, 0.05, 0.0).unwrap();
        let b = penalized_step(&state, 0.05, &spec, &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn obstacle_far_below_keeps_zero_fixed_under_every_batch() {
        let grid = Grid2D::new(8).unwrap();
        let spec = ObstacleSpec::new(
            &grid,
            DVector::from_element(grid.interior_len(), -1e6),
            grid.eval_interior(|_, _| 0.0),
            DVector::zeros(grid.interior_len()),
            1e-8,
            1e-10,
            0.25,
        )
        .unwrap();
        let partition = build_partition(&grid, 0.1).unwrap();
        let exp = DdExperiment::singleton(grid, spec, &partition);
        for j in 0..4 {
            let w = exp
                .dd_minimizing_step(&DVector::zeros(grid.interior_len()), j, 0.05, 0.0)
                .unwrap();
            assert!(w.amax() <= 1e-10, "batch {j} moved zero state");
        }
    }

    #[test]
    fn unselected_far_subdomain_barely_moves() {
        // A step under batch 0 (lower-left) changes nodes deep in the other
        // subdomains only through the (inactive) penalty: relative change
        // below 1e-8.
        let (grid, spec, partition) = small_setup();
        let exp = DdExperiment::singleton(grid, spec, &partition);
        let state = grid.eval_interior(|x, y| 0.2 * (1.0 - x * x) * (1.0 - y * y));
        let w = exp.dd_minimizing_step(&state, 0, 0.05, 0.0).unwrap();
        let scale = state.amax();
        for iy in 1..=grid.interior_per_side() {
            for ix in 1..=grid.interior_per_side() {
                let (x, y) = (grid.coord(ix), grid.coord(iy));
                if x > 0.3 && y > 0.3 {
                    let k = grid.interior_idx(ix, iy);
                    let rel = (w[k] - state[k]).abs() / scale;
                    assert!(rel <= 1e-8, "node ({x},{y}) moved by {rel}");
                }
            }
        }
    }

    #[test]
    fn zero_variance_realizations_are_schedule_independent() {
        // With every batch seeing the full operator, the drawn indices are
        // irrelevant: any two realizations coincide to solver tolerance
        // (here bitwise, the steppers are identical objects).
        let (grid, spec, _) = small_setup();
        let exp = DdExperiment::zero_variance(grid, spec, 4);
        let times = eval_grid(0.25, 0.125, 11);
        let sa = crate::flow::draw_schedule_probs(exp.pi(), 0.125, 0.25, 1).unwrap();
        let sb = crate::flow::draw_schedule_probs(exp.pi(), 0.125, 0.25, 999).unwrap();
        assert_ne!(sa.indices, sb.indices);
        let ra = exp.realization_at(&sa, &times).unwrap();
        let rb = exp.realization_at(&sb, &times).unwrap();
        for (a, b) in ra.iter().zip(&rb) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn errors_decrease_with_epsilon() {
        let (grid, spec, partition) = small_setup();
        let exp = DdExperiment::singleton(grid, spec, &partition);
        let report = run_dd_experiment(&exp, &[0.125, 0.0625, 0.03125], 4, 7, 0.005, 21).unwrap();
        let sups: Vec<f64> = report.entries.iter().map(|e| e.sup_mean_sq).collect();
        assert!(
            sups[0] > sups[1] && sups[1] > sups[2],
            "not decreasing: {sups:?}"
        );
    }
}
