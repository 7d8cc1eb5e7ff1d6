//! Implicit (backward-Euler / proximal) steps of the penalized obstacle
//! dynamics by semismooth Newton, and a projected Gauss-Seidel oracle for
//! the stationary variational inequality.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::obstacle::{Grid2D, ObstacleSpec, WeightedLaplacian};

/// Newton residual target (sup norm).
pub const NEWTON_TOL: f64 = 1e-10;
/// Newton iteration cap.
pub const NEWTON_MAX_ITER: usize = 50;

/// Smoothed max `(x + sqrt(x^2 + s^2)) / 2`.
pub fn smooth_max(x: f64, s: f64) -> f64 {
    0.5 * (x + (x * x + s * s).sqrt())
}

/// Derivative of [`smooth_max`] in `(0, 1)`.
pub fn smooth_max_prime(x: f64, s: f64) -> f64 {
    0.5 * (1.0 + x / (x * x + s * s).sqrt())
}

/// Antiderivative of [`smooth_max`] with value 0 at 0 (the penalty energy
/// density). For `x < 0` the sum `x + r` is evaluated as `s^2 / (r - x)`,
/// which stays accurate where the direct form cancels to zero.
pub fn smooth_max_integral(x: f64, s: f64) -> f64 {
    let r = (x * x + s * s).sqrt();
    let x_plus_r = if x < 0.0 { s * s / (r - x) } else { x + r };
    0.25 * x * x_plus_r + 0.25 * s * s * (x_plus_r / s).ln()
}

/// Solves implicit steps `(I - tau L) w - tau/delta max_s(psi - w) - tau f_w
/// = w_prev` for a fixed weighted operator and step size.
///
/// The Jacobian `I - tau L + (tau/delta) diag(max_s'(psi - w))` is symmetric
/// positive definite; its Cholesky factorization is reused across Newton
/// iterations while the penalty active set is unchanged.
pub struct ImplicitStepper {
    a_base: DMatrix<f64>,
    rhs_forcing: DVector<f64>,
    tau: f64,
    delta: f64,
    s: f64,
    psi: DVector<f64>,
    cached: Option<(Vec<bool>, Cholesky<f64, Dyn>)>,
}

impl ImplicitStepper {
    pub fn new(grid: &Grid2D, spec: &ObstacleSpec, op: &WeightedLaplacian, tau: f64) -> Self {
        let m = grid.interior_len();
        let mut a_base = op.to_dense() * (-tau);
        for i in 0..m {
            a_base[(i, i)] += 1.0;
        }
        let rhs_forcing = op.interior_weight().component_mul(&spec.source) * tau;
        Self {
            a_base,
            rhs_forcing,
            tau,
            delta: spec.delta,
            s: spec.smooth_width,
            psi: spec.psi.clone(),
            cached: None,
        }
    }

    fn residual(&self, w: &DVector<f64>, w_prev: &DVector<f64>) -> DVector<f64> {
        let mut r = &self.a_base * w - w_prev - &self.rhs_forcing;
        for i in 0..w.len() {
            r[i] -= self.tau / self.delta * smooth_max(self.psi[i] - w[i], self.s);
        }
        r
    }

    /// One implicit step from `w_prev` at time `t` (time only labels
    /// failures).
    pub fn step(&mut self, w_prev: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let mut w = w_prev.clone();
        let mut history = Vec::new();
        for _ in 0..NEWTON_MAX_ITER {
            let r = self.residual(&w, w_prev);
            let rn = r.amax();
            history.push(rn);
            if rn <= NEWTON_TOL {
                return Ok(w);
            }
            let active: Vec<bool> = (0..w.len()).map(|i| self.psi[i] - w[i] > 0.0).collect();
            let reuse = self
                .cached
                .as_ref()
                .map(|(mask, _)| *mask == active)
                .unwrap_or(false);
            if !reuse {
                let mut jac = self.a_base.clone();
                for i in 0..w.len() {
                    jac[(i, i)] += self.tau / self.delta
                        * smooth_max_prime(self.psi[i] - w[i], self.s);
                }
                let chol = Cholesky::new(jac).ok_or_else(|| Error::NewtonFailure {
                    time: t,
                    residual_history: history.clone(),
                })?;
                self.cached = Some((active, chol));
            }
            let delta_w = self.cached.as_ref().expect("factorization cached").1.solve(&r);
            w -= delta_w;
        }
        Err(Error::NewtonFailure {
            time: t,
            residual_history: history,
        })
    }

    /// Discrete energy `1/2 <-Lw, w> - <f_w, w> + 1/delta sum M_s(psi - w)`
    /// whose implicit step this solver computes. `op` must be the operator
    /// the stepper was built with.
    pub fn energy(&self, op: &WeightedLaplacian, spec: &ObstacleSpec, w: &DVector<f64>) -> f64 {
        let lw = op.apply(w);
        let forcing = op.interior_weight().component_mul(&spec.source);
        let mut pen = 0.0;
        for i in 0..w.len() {
            pen += smooth_max_integral(self.psi[i] - w[i], self.s);
        }
        -0.5 * lw.dot(w) - forcing.dot(w) + pen / self.delta
    }
}

/// One backward-Euler step of the penalized problem under the full
/// Laplacian (the reference scheme). The randomized scheme with the full
/// batch is the identical computation.
pub fn penalized_step(
    state: &DVector<f64>,
    h_time: f64,
    spec: &ObstacleSpec,
    grid: &Grid2D,
) -> Result<DVector<f64>> {
    if h_time <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time step {h_time} must be positive"
        )));
    }
    let op = WeightedLaplacian::laplacian(*grid);
    ImplicitStepper::new(grid, spec, &op, h_time).step(state, 0.0)
}

/// Projected Gauss-Seidel for the stationary obstacle problem
/// `min 1/2 <-Lu, u> - <f, u>` subject to `u >= psi`.
pub fn projected_gauss_seidel(
    grid: &Grid2D,
    psi: &DVector<f64>,
    f: &DVector<f64>,
    tol: f64,
    max_sweeps: usize,
) -> Result<DVector<f64>> {
    let a = WeightedLaplacian::laplacian(*grid).to_dense() * (-1.0);
    let m = grid.interior_len();
    let mut u = psi.map(|v| v.max(0.0));
    for _ in 0..max_sweeps {
        let mut change: f64 = 0.0;
        for i in 0..m {
            let row = a.row(i);
            let sigma = row.dot(&u.transpose()) - a[(i, i)] * u[i];
            let cand = (f[i] - sigma) / a[(i, i)];
            let new = cand.max(psi[i]);
            change = change.max((new - u[i]).abs());
            u[i] = new;
        }
        if change <= tol {
            return Ok(u);
        }
    }
    Err(Error::NonConvergence {
        solver: "projected Gauss-Seidel",
        iterations: max_sweeps,
        residual: f64::NAN,
    })
}
