//! Five-point finite-difference discretization of `div(chi grad u)` with
//! homogeneous Dirichlet boundary.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::obstacle::Grid2D;

/// The operator `u -> div(chi grad u)` on interior grid functions.
///
/// Face coefficients are arithmetic means of the weight at the two adjacent
/// nodes, so the operator is linear in the node weights: summing operators
/// is summing weights, and the four subdomain operators add up to the plain
/// Laplacian exactly. The matrix is symmetric negative semidefinite for
/// nonnegative weights.
#[derive(Debug, Clone)]
pub struct WeightedLaplacian {
    grid: Grid2D,
    weight: Vec<f64>,
}

impl WeightedLaplacian {
    /// `weight` lives on the full lattice (boundary ring included).
    pub fn new(grid: Grid2D, weight: Vec<f64>) -> Result<Self> {
        if weight.len() != grid.full_len() {
            return Err(Error::InvalidArgument(format!(
                "weight has {} nodes, full lattice needs {}",
                weight.len(),
                grid.full_len()
            )));
        }
        if weight.iter().any(|&w| w < -1e-12) {
            return Err(Error::InvalidArgument(
                "operator weights must be nonnegative".into(),
            ));
        }
        Ok(Self { grid, weight })
    }

    /// The unweighted Laplacian (`chi = 1`).
    pub fn laplacian(grid: Grid2D) -> Self {
        Self {
            weight: vec![1.0; grid.full_len()],
            grid,
        }
    }

    /// Sums operators by summing their node weights.
    pub fn sum(grid: Grid2D, parts: &[&WeightedLaplacian]) -> Result<Self> {
        let mut weight = vec![0.0; grid.full_len()];
        for p in parts {
            for (w, &v) in weight.iter_mut().zip(&p.weight) {
                *w += v;
            }
        }
        Self::new(grid, weight)
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// Applies the operator to an interior grid function.
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.grid.interior_per_side();
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let mut out = DVector::zeros(u.len());
        let at = |ix: usize, iy: usize, u: &DVector<f64>| -> f64 {
            if ix == 0 || iy == 0 || ix == n + 1 || iy == n + 1 {
                0.0
            } else {
                u[self.grid.interior_idx(ix, iy)]
            }
        };
        for iy in 1..=n {
            for ix in 1..=n {
                let w_c = self.weight[self.grid.full_idx(ix, iy)];
                let uc = u[self.grid.interior_idx(ix, iy)];
                let mut acc = 0.0;
                for (jx, jy) in [(ix - 1, iy), (ix + 1, iy), (ix, iy - 1), (ix, iy + 1)] {
                    let w_face = 0.5 * (w_c + self.weight[self.grid.full_idx(jx, jy)]);
                    acc += w_face * (at(jx, jy, u) - uc);
                }
                out[self.grid.interior_idx(ix, iy)] = acc * inv_h2;
            }
        }
        out
    }

    /// Dense matrix of the operator on interior unknowns.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.grid.interior_per_side();
        let m = self.grid.interior_len();
        let inv_h2 = 1.0 / (self.grid.spacing() * self.grid.spacing());
        let mut a = DMatrix::zeros(m, m);
        for iy in 1..=n {
            for ix in 1..=n {
                let row = self.grid.interior_idx(ix, iy);
                let w_c = self.weight[self.grid.full_idx(ix, iy)];
                let mut diag = 0.0;
                for (jx, jy) in [(ix - 1, iy), (ix + 1, iy), (ix, iy - 1), (ix, iy + 1)] {
                    let w_face = 0.5 * (w_c + self.weight[self.grid.full_idx(jx, jy)]);
                    diag -= w_face;
                    if jx >= 1 && jx <= n && jy >= 1 && jy <= n {
                        a[(row, self.grid.interior_idx(jx, jy))] = w_face * inv_h2;
                    }
                }
                a[(row, row)] = diag * inv_h2;
            }
        }
        a
    }

    /// Restriction of the weight to interior nodes (for weighting sources).
    pub fn interior_weight(&self) -> DVector<f64> {
        let n = self.grid.interior_per_side();
        let mut out = DVector::zeros(self.grid.interior_len());
        for iy in 1..=n {
            for ix in 1..=n {
                out[self.grid.interior_idx(ix, iy)] = self.weight[self.grid.full_idx(ix, iy)];
            }
        }
        out
    }
}
