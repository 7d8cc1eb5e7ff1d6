//! Quadratic potentials with exact flows and proximal maps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetry tolerance enforced at construction.
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-EIG_TOL` reject the matrix as indefinite.
const EIG_TOL: f64 = 1e-10;

/// The potential `u -> 1/2 u'Hu + c'u + constant` with `H` symmetric
/// positive semidefinite.
///
/// A symmetric eigendecomposition of `H` is computed once at construction;
/// the exact gradient-flow evolution, the proximal map and the prox of any
/// positively scaled copy are all evaluated in the eigenbasis.
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    h: DMatrix<f64>,
    c: DVector<f64>,
    constant: f64,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl QuadraticPotential {
    /// Builds the potential, rejecting asymmetric or indefinite `H`.
    pub fn new(h: DMatrix<f64>, c: DVector<f64>, constant: f64) -> Result<Self> {
        if !h.is_square() || h.nrows() != c.len() {
            return Err(Error::InvalidArgument(format!(
                "quadratic dimensions inconsistent: H is {}x{}, c has length {}",
                h.nrows(),
                h.ncols(),
                c.len()
            )));
        }
        let scale = h.amax().max(1.0);
        for i in 0..h.nrows() {
            for j in 0..i {
                if (h[(i, j)] - h[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetric H: |H[{i},{j}] - H[{j},{i}]| = {:.3e}",
                        (h[(i, j)] - h[(j, i)]).abs()
                    )));
                }
            }
        }
        let eig = h.clone().symmetric_eigen();
        if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -EIG_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "H is not positive semidefinite: smallest eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self {
            h,
            c,
            constant,
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
        })
    }

    /// Least-squares potential `1/2 ||Au - b||^2` scaled by `scale`,
    /// i.e. `H = scale A'A`, `c = -scale A'b`.
    pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, scale: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "least squares dimensions inconsistent: A is {}x{}, b has length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        let h = a.transpose() * a * scale;
        let c = -(a.transpose() * b) * scale;
        let constant = 0.5 * scale * b.dot(b);
        Self::new(h, c, constant)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.c
    }

    /// Largest eigenvalue of `H` (the gradient Lipschitz constant).
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigvals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        0.5 * (&self.h * u).dot(u) + self.c.dot(u) + self.constant
    }

    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.h * u + &self.c
    }

    /// Exact solution at time `t` of `du/dt = -Hu - c` started at `u0`.
    ///
    /// In the eigenbasis each coefficient evolves as
    /// `exp(-t l) y0 - t phi(t l) y_c` with `phi(z) = (1 - exp(-z))/z`;
    /// `phi` is evaluated by its series for `|z| < 1e-6` to avoid
    /// cancellation near `z = 0`.
    pub fn evolve(&self, u0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        let y0 = self.eigvecs.transpose() * u0;
        let yc = self.eigvecs.transpose() * &self.c;
        let mut y = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let z = t * self.eigvals[i];
            y[i] = (-z).exp() * y0[i] - t * phi1(z) * yc[i];
        }
        Ok(&self.eigvecs * y)
    }

    /// Proximal map `argmin_w value(w) + ||w - x||^2 / (2 tau)`,
    /// i.e. `(I + tau H)^{-1} (x - tau c)`, evaluated in the eigenbasis.
    pub fn prox(&self, x: &DVector<f64>, tau: f64) -> DVector<f64> {
        let mut y = self.eigvecs.transpose() * (x - &self.c * tau);
        for i in 0..self.dim() {
            y[i] /= 1.0 + tau * self.eigvals[i];
        }
        &self.eigvecs * y
    }

    /// Returns `scale * self` as a new potential (shares no state).
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            h: &self.h * scale,
            c: &self.c * scale,
            constant: self.constant * scale,
            eigvals: &self.eigvals * scale,
            eigvecs: self.eigvecs.clone(),
        }
    }

    /// Weighted sum of quadratics; coefficients must be nonnegative so the
    /// result stays positive semidefinite.
    pub fn weighted_sum(terms: &[(f64, &QuadraticPotential)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, q)| q.dim())
            .ok_or_else(|| Error::InvalidArgument("empty quadratic sum".into()))?;
        let mut h = DMatrix::zeros(dim, dim);
        let mut c = DVector::zeros(dim);
        let mut constant = 0.0;
        for (w, q) in terms {
            h += &q.h * *w;
            c += &q.c * *w;
            constant += q.constant * *w;
        }
        Self::new(h, c, constant)
    }
}

/// `phi(z) = (1 - exp(-z)) / z`, series near zero.
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        (1.0 - (-z).exp()) / z
    }
}
