//! Sparse inversion case study: `min 1/2 ||Au - b||^2 + lambda ||u||_1`
//! with exact piecewise mini-batch dynamics.

use nalgebra::{DMatrix, DVector};

use crate::convex::{l1_min_norm_selection, soft_threshold, Potential, QuadraticPotential};
use crate::error::{Error, Result};
use crate::flow::BatchSystem;

/// KKT residual target of the coordinate-descent optimum.
const CD_TOL: f64 = 1e-10;
const CD_MAX_SWEEPS: usize = 1_000_000;

/// Problem data. Batch 1 carries the quadratic part scaled by `1/pi_1`,
/// batch 2 the l1 part scaled by `1/pi_2`, so the probability-weighted sum
/// of the batch potentials reproduces the objective.
#[derive(Debug, Clone)]
pub struct SparseProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    pi: [f64; 2],
    quad: QuadraticPotential,
    gram: DMatrix<f64>,
    atb: DVector<f64>,
}

impl SparseProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, lambda: f64, pi: [f64; 2]) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "A is {}x{} but b has length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if lambda < 0.0 {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} < 0")));
        }
        if pi[0] <= 0.0 || pi[1] <= 0.0 || (pi[0] + pi[1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "batch probabilities {pi:?} must be positive and sum to 1"
            )));
        }
        let quad = QuadraticPotential::least_squares(&a, &b, 1.0 / pi[0])?;
        let gram = a.transpose() * &a;
        let atb = a.transpose() * &b;
        Ok(Self {
            a,
            b,
            lambda,
            pi,
            quad,
            gram,
            atb,
        })
    }

    /// The instance of the worked example:
    /// `A = [[1.76, 0.4], [0.98, 2.24]]`, `b = (1.87, -0.98)`, `lambda = 1`.
    pub fn example_instance(pi: [f64; 2]) -> Self {
        let a = DMatrix::from_row_slice(2, 2, &[1.76, 0.4, 0.98, 2.24]);
        let b = DVector::from_vec(vec![1.87, -0.98]);
        Self::new(a, b, 1.0, pi).expect("example instance is well formed")
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pi(&self) -> [f64; 2] {
        self.pi
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    /// Objective `1/2 ||Au - b||^2 + lambda ||u||_1`.
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        let r = &self.a * u - &self.b;
        0.5 * r.norm_squared() + self.lambda * u.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Smooth gradient `A'(Au - b)`.
    pub fn smooth_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.gram * u - &self.atb
    }

    /// The batch system with singleton batches `{quadratic}, {l1}`.
    pub fn batch_system(&self) -> Result<BatchSystem> {
        let quad = Potential::Quadratic(self.quad.clone());
        let l1 = Potential::l1(self.dim(), self.lambda / self.pi[1]);
        BatchSystem::singleton_batches(vec![quad, l1], vec![self.pi[0], self.pi[1]])
    }

    /// Exact mini-batch segment: branch 1 evolves the scaled quadratic flow
    /// in closed form, branch 2 shrinks every component linearly toward
    /// zero at rate `lambda / pi_2` and sticks there.
    pub fn exact_mbd_segment(
        &self,
        branch: usize,
        v_start: &DVector<f64>,
        duration: f64,
    ) -> Result<DVector<f64>> {
        if duration < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "negative segment duration {duration}"
            )));
        }
        match branch {
            1 => self.quad.evolve(v_start, duration),
            2 => Ok(soft_threshold(
                v_start,
                self.lambda / self.pi[1] * duration,
            )),
            other => Err(Error::InvalidArgument(format!(
                "invalid branch tag {other}, expected 1 or 2"
            ))),
        }
    }

    /// Reference sparse inversion flow by forward-backward sub-stepping:
    /// explicit on the quadratic, soft threshold on the l1, step `h`.
    pub fn sparse_flow_reference(
        &self,
        u0: &DVector<f64>,
        times: &[f64],
        h: f64,
    ) -> Result<Vec<DVector<f64>>> {
        self.flow_reference(u0, times, h, ReferenceMode::ForwardBackward)
    }

    /// Explicit subgradient-Euler reference with the minimal-norm selection,
    /// reproducing the worked example's integration scheme. Rejects steps
    /// with `h ||A'A|| >= 2` (the stability bound of the explicit scheme).
    pub fn explicit_flow_reference(
        &self,
        u0: &DVector<f64>,
        times: &[f64],
        h: f64,
    ) -> Result<Vec<DVector<f64>>> {
        if h * self.quad_norm() >= 2.0 {
            return Err(Error::InvalidArgument(format!(
                "explicit step too large: h ||A'A|| = {} >= 2",
                h * self.quad_norm()
            )));
        }
        self.flow_reference(u0, times, h, ReferenceMode::ExplicitSubgradient)
    }

    fn quad_norm(&self) -> f64 {
        // ||A'A|| for the unscaled quadratic part.
        self.quad.max_eigenvalue() * self.pi[0]
    }

    fn flow_reference(
        &self,
        u0: &DVector<f64>,
        times: &[f64],
        h: f64,
        mode: ReferenceMode,
    ) -> Result<Vec<DVector<f64>>> {
        if h <= 0.0 {
            return Err(Error::InvalidArgument(format!("step h = {h} <= 0")));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut t = 0.0;
        let mut u = u0.clone();
        for &target in times {
            while t < target {
                let dt = h.min(target - t);
                let g = self.smooth_gradient(&u);
                u = match mode {
                    ReferenceMode::ForwardBackward => {
                        soft_threshold(&(&u - &g * dt), dt * self.lambda)
                    }
                    ReferenceMode::ExplicitSubgradient => {
                        let theta = l1_min_norm_selection(&u, &g, self.lambda);
                        &u - (g + theta * self.lambda) * dt
                    }
                };
                t += dt;
            }
            out.push(u.clone());
        }
        Ok(out)
    }

    /// Minimizer by cyclic coordinate descent to KKT residual `<= 1e-10`,
    /// returning the point and its per-coordinate KKT certificate.
    pub fn lasso_optimum(&self) -> Result<LassoSolution> {
        let d = self.dim();
        if self.lambda == 0.0 {
            let diag_ok = (0..d).all(|i| self.gram[(i, i)] > 0.0);
            if !diag_ok {
                return Err(Error::InvalidArgument(
                    "lambda = 0 needs positive definite A'A".into(),
                ));
            }
        }
        let mut u = DVector::zeros(d);
        for sweep in 0..CD_MAX_SWEEPS {
            for i in 0..d {
                let hii = self.gram[(i, i)];
                if hii == 0.0 {
                    continue;
                }
                // Partial residual excluding coordinate i.
                let gi = self.gram.row(i).transpose().dot(&u) - hii * u[i] - self.atb[i];
                let z = -gi;
                u[i] = z.signum() * (z.abs() - self.lambda).max(0.0) / hii;
            }
            let res = self.kkt_residual(&u);
            if res <= CD_TOL {
                return Ok(LassoSolution {
                    point: u.clone(),
                    kkt_residual: res,
                    certificate: self.kkt_certificate(&u),
                    sweeps: sweep + 1,
                });
            }
        }
        Err(Error::NonConvergence {
            solver: "lasso coordinate descent",
            iterations: CD_MAX_SWEEPS,
            residual: self.kkt_residual(&u),
        })
    }

    /// Max over coordinates of the distance of `-[A'(Au-b)]_i` from
    /// `lambda d|u_i|`.
    pub fn kkt_residual(&self, u: &DVector<f64>) -> f64 {
        let g = self.smooth_gradient(u);
        (0..self.dim())
            .map(|i| {
                if u[i] != 0.0 {
                    (g[i] + self.lambda * u[i].signum()).abs()
                } else {
                    (g[i].abs() - self.lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn kkt_certificate(&self, u: &DVector<f64>) -> Vec<KktCoordinate> {
        let g = self.smooth_gradient(u);
        (0..self.dim())
            .map(|i| KktCoordinate {
                coordinate: i,
                value: u[i],
                neg_gradient: -g[i],
                bound: self.lambda,
            })
            .collect()
    }

    /// Variance upper-bound functional of the worked example:
    /// `Gamma(u) = pi_2^2/pi_1 ||A'(Au-b)||^2 + pi_1^2/pi_2 (lambda d)^2`.
    pub fn gamma_bound(&self, u: &DVector<f64>) -> f64 {
        let g = self.smooth_gradient(u);
        let d = self.dim() as f64;
        self.pi[1] * self.pi[1] / self.pi[0] * g.norm_squared()
            + self.pi[0] * self.pi[0] / self.pi[1] * (self.lambda * d) * (self.lambda * d)
    }
}

enum ReferenceMode {
    ForwardBackward,
    ExplicitSubgradient,
}

/// Coordinate descent output with its optimality certificate.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub point: DVector<f64>,
    pub kkt_residual: f64,
    pub certificate: Vec<KktCoordinate>,
    pub sweeps: usize,
}

/// Membership record `-[A'(Au-b)]_i in lambda d|u_i|`.
#[derive(Debug, Clone)]
pub struct KktCoordinate {
    pub coordinate: usize,
    pub value: f64,
    pub neg_gradient: f64,
    pub bound: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> SparseProblem {
        SparseProblem::example_instance([0.5, 0.5])
    }

    #[test]
    fn branch_two_shrinks_componentwise() {
        // Hand integration of du/dt = -2 sgn(u) over 0.1: shrink by 0.2,
        // second component crosses zero and sticks.
        let p = example();
        let v = p
            .exact_mbd_segment(2, &DVector::from_vec(vec![0.5, -0.2]), 0.1)
            .unwrap();
        assert_eq!(v[0], 0.3);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn branch_one_identity_matrix_decays() {
        // A = I, b = 0: the branch-1 flow decays coordinatewise at rate
        // 1/pi_1, so duration pi_1 lands on e^{-1}.
        let a = DMatrix::identity(2, 2);
        let b = DVector::zeros(2);
        let p = SparseProblem::new(a, b, 1.0, [0.5, 0.5]).unwrap();
        let v = p
            .exact_mbd_segment(1, &DVector::from_vec(vec![1.0, 1.0]), 0.5)
            .unwrap();
        assert!((v[0] - (-1.0f64).exp()).abs() < 1e-14);
        assert!((v[1] - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn branch_one_least_squares_solution_is_stationary() {
        let p = example();
        let u_star = p.matrix().clone().lu().solve(p.rhs()).unwrap();
        let v = p.exact_mbd_segment(1, &u_star, 2.0).unwrap();
        assert!((v - &u_star).amax() < 1e-12);
    }

    #[test]
    fn invalid_branch_rejected() {
        let p = example();
        assert!(p.exact_mbd_segment(3, &DVector::zeros(2), 0.1).is_err());
        assert!(p.exact_mbd_segment(1, &DVector::zeros(2), -0.1).is_err());
    }

    #[test]
    fn lasso_optimum_matches_example_rounding() {
        // The printed optimum (0.65, -0.45) is 2-decimal rounding; the
        // coordinate-descent point is the ground truth.
        let p = example();
        let sol = p.lasso_optimum().unwrap();
        assert!(sol.kkt_residual <= CD_TOL);
        assert!((sol.point[0] - 0.65).abs() < 0.02, "{}", sol.point[0]);
        assert!((sol.point[1] + 0.45).abs() < 0.02, "{}", sol.point[1]);
    }

    #[test]
    fn lasso_lambda_zero_is_least_squares() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.1, 1.5]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let p = SparseProblem::new(a.clone(), b.clone(), 0.0, [0.5, 0.5]).unwrap();
        let sol = p.lasso_optimum().unwrap();
        let exact = a.lu().solve(&b).unwrap();
        assert!((sol.point - exact).amax() < 1e-9);
    }

    #[test]
    fn lasso_large_lambda_is_zero() {
        // ||A'b||_inf = 2.3308 < 3, so zero satisfies the KKT conditions.
        let a = DMatrix::from_row_slice(2, 2, &[1.76, 0.4, 0.98, 2.24]);
        let b = DVector::from_vec(vec![1.87, -0.98]);
        let atb_inf = (a.transpose() * &b).amax();
        assert!((atb_inf - 2.3308).abs() < 1e-12);
        let p = SparseProblem::new(a, b, 3.0, [0.5, 0.5]).unwrap();
        let sol = p.lasso_optimum().unwrap();
        assert_eq!(sol.point, DVector::zeros(2));
    }

    #[test]
    fn reference_flow_pure_decay_when_unregularized() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::zeros(2);
        let p = SparseProblem::new(a, b, 0.0, [0.5, 0.5]).unwrap();
        let u0 = DVector::from_vec(vec![1.0, -2.0]);
        let states = p
            .sparse_flow_reference(&u0, &[0.0, 1.0], 1e-4)
            .unwrap();
        for i in 0..2 {
            assert!((states[1][i] - u0[i] * (-1.0f64).exp()).abs() < 1e-3);
        }
    }

    #[test]
    fn reference_flow_reaches_optimum() {
        let p = example();
        let sol = p.lasso_optimum().unwrap();
        let states = p
            .sparse_flow_reference(&DVector::zeros(2), &[0.0, 5.0], 0.001)
            .unwrap();
        assert!(
            (states[1].clone() - &sol.point).norm() < 0.02,
            "endpoint {:?} vs {:?}",
            states[1],
            sol.point
        );
    }

    #[test]
    fn reference_flow_stationary_at_optimum() {
        let p = example();
        let sol = p.lasso_optimum().unwrap();
        let states = p
            .sparse_flow_reference(&sol.point, &[0.0, 1.0], 0.001)
            .unwrap();
        assert!((states[1].clone() - &sol.point).amax() < 1e-9);
    }

    #[test]
    fn explicit_mode_rejects_unstable_step() {
        let p = example();
        assert!(p
            .explicit_flow_reference(&DVector::zeros(2), &[0.0, 1.0], 1.0)
            .is_err());
    }

    #[test]
    fn gamma_at_zero_matches_formula_arithmetic() {
        // 0.5 (2.3308^2 + 1.4472^2) + 0.5 * 4 with A'b computed exactly.
        let p = example();
        let g = p.gamma_bound(&DVector::zeros(2));
        let atb = p.matrix().transpose() * p.rhs();
        let expected = 0.5 * atb.norm_squared() + 0.5 * 4.0;
        assert!((g - expected).abs() < 1e-12);
        assert!((g - 5.763).abs() < 5e-4, "Gamma(0) = {g}");
    }

    #[test]
    fn gamma_vanishes_at_least_squares_solution_without_l1() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.1, 1.5]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let p = SparseProblem::new(a.clone(), b.clone(), 0.0, [0.5, 0.5]).unwrap();
        let ls = a.lu().solve(&b).unwrap();
        assert!(p.gamma_bound(&ls) < 1e-24);
    }

    #[test]
    fn quadratic_only_segment_composition_reproduces_exact_flow() {
        // lambda = 0, always drawing branch 1: composing segments over
        // [0, T] equals the closed-form quadratic flow over T.
        let a = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.0, 0.8]);
        let b = DVector::from_vec(vec![0.4, -0.1]);
        let p = SparseProblem::new(a.clone(), b.clone(), 0.0, [0.5, 0.5]).unwrap();
        let u0 = DVector::from_vec(vec![1.0, 1.0]);
        let mut v = u0.clone();
        for _ in 0..8 {
            v = p.exact_mbd_segment(1, &v, 0.25).unwrap();
        }
        let direct = p.exact_mbd_segment(1, &u0, 2.0).unwrap();
        assert!((v - direct).amax() < 1e-10);
    }
}
