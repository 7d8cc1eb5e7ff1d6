//! Penalized parabolic obstacle problem on a uniform 2D grid with a
//! randomized domain-decomposition minimizing movement.

mod experiment;
mod operator;
mod solver;

pub use experiment::{run_dd_experiment, DdExperiment};
pub use operator::WeightedLaplacian;
pub use solver::{penalized_step, projected_gauss_seidel, ImplicitStepper};

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Uniform grid on `[-1, 1]^2` with `n x n` interior nodes, spacing
/// `2/(n+1)` and homogeneous Dirichlet boundary.
///
/// Grid functions are flat vectors in row-major node order; the full
/// lattice including the boundary ring has `(n+2)^2` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid2D {
    n: usize,
}

impl Grid2D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 4 interior nodes per side, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn interior_per_side(&self) -> usize {
        self.n
    }

    pub fn interior_len(&self) -> usize {
        self.n * self.n
    }

    pub fn full_per_side(&self) -> usize {
        self.n + 2
    }

    pub fn full_len(&self) -> usize {
        (self.n + 2) * (self.n + 2)
    }

    pub fn spacing(&self) -> f64 {
        2.0 / (self.n + 1) as f64
    }

    /// Coordinate of lattice index `i` in `0..n+2` (0 and n+1 are boundary).
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.spacing()
    }

    /// Flat index on the full lattice.
    pub fn full_idx(&self, ix: usize, iy: usize) -> usize {
        iy * (self.n + 2) + ix
    }

    /// Flat index of interior node `(ix, iy)`, both in `1..=n`.
    pub fn interior_idx(&self, ix: usize, iy: usize) -> usize {
        (iy - 1) * self.n + (ix - 1)
    }

    /// Evaluates a function of `(x, y)` on the full lattice.
    pub fn eval_full(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let m = self.full_per_side();
        let mut out = Vec::with_capacity(self.full_len());
        for iy in 0..m {
            for ix in 0..m {
                out.push(f(self.coord(ix), self.coord(iy)));
            }
        }
        out
    }

    /// Evaluates a function of `(x, y)` on the interior nodes.
    pub fn eval_interior(&self, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.interior_len());
        for iy in 1..=self.n {
            for ix in 1..=self.n {
                out[self.interior_idx(ix, iy)] = f(self.coord(ix), self.coord(iy));
            }
        }
        out
    }

    /// Squared L2 grid norm `h^2 sum v_i^2`.
    pub fn l2_norm_squared(&self, v: &DVector<f64>) -> f64 {
        self.spacing() * self.spacing() * v.norm_squared()
    }
}

/// Four partition weights built from tensor products of a 1D ramp of
/// half-width `w`: `h(x) = 0` left of the ramp, `(x + w)/(2w)` across it,
/// `1` right of it. `chi_1` concentrates on the lower-left subdomain.
///
/// The fourth weight is evaluated as the residual `1 - chi_1 - chi_2 -
/// chi_3` so the partition sums to one exactly at every node.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    chi: [Vec<f64>; 4],
    ramp_halfwidth: f64,
}

/// The 1D ramp profile.
pub fn ramp(x: f64, w: f64) -> f64 {
    if x <= -w {
        0.0
    } else if x >= w {
        1.0
    } else {
        (x + w) / (2.0 * w)
    }
}

/// Builds the partition of unity subordinate to the four quadrant boxes.
pub fn build_partition(grid: &Grid2D, ramp_halfwidth: f64) -> Result<PartitionOfUnity> {
    if !(ramp_halfwidth > 0.0 && ramp_halfwidth < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ramp half-width {ramp_halfwidth} must lie in (0, 1)"
        )));
    }
    let w = ramp_halfwidth;
    let chi1 = grid.eval_full(|x, y| (1.0 - ramp(x, w)) * (1.0 - ramp(y, w)));
    let chi2 = grid.eval_full(|x, y| ramp(x, w) * (1.0 - ramp(y, w)));
    let chi3 = grid.eval_full(|x, y| (1.0 - ramp(x, w)) * ramp(y, w));
    let chi4: Vec<f64> = (0..grid.full_len())
        .map(|i| 1.0 - chi1[i] - chi2[i] - chi3[i])
        .collect();
    Ok(PartitionOfUnity {
        chi: [chi1, chi2, chi3, chi4],
        ramp_halfwidth,
    })
}

impl PartitionOfUnity {
    pub fn num_subdomains(&self) -> usize {
        4
    }

    pub fn ramp_halfwidth(&self) -> f64 {
        self.ramp_halfwidth
    }

    /// Weight function of subdomain `i` (0-based) on the full lattice.
    pub fn weight(&self, i: usize) -> &[f64] {
        &self.chi[i]
    }

    /// Effective batch weight `(1/|B|) sum_{i in B} chi_i / p_i` on the
    /// full lattice.
    ///
    /// Each sub-potential carries its `1/p_i` scaling, so the
    /// probability-weighted sum of the batch operators reproduces the full
    /// Laplacian; for the full batch with uniform weights this evaluates to
    /// exactly one at every node.
    pub fn batch_weight(&self, batch: &[usize], weights: &[f64]) -> Vec<f64> {
        let inv = 1.0 / batch.len() as f64;
        let mut out = vec![0.0; self.chi[0].len()];
        for &i in batch {
            let scale = inv / weights[i];
            for (o, &c) in out.iter_mut().zip(&self.chi[i]) {
                *o += scale * c;
            }
        }
        out
    }
}

/// Obstacle-problem data on a grid: obstacle, source, initial state,
/// penalization and smoothing parameters, horizon.
#[derive(Debug, Clone)]
pub struct ObstacleSpec {
    pub psi: DVector<f64>,
    pub source: DVector<f64>,
    pub u0: DVector<f64>,
    pub delta: f64,
    pub smooth_width: f64,
    pub horizon: f64,
}

impl ObstacleSpec {
    pub fn new(
        grid: &Grid2D,
        psi: DVector<f64>,
        source: DVector<f64>,
        u0: DVector<f64>,
        delta: f64,
        smooth_width: f64,
        horizon: f64,
    ) -> Result<Self> {
        let n = grid.interior_len();
        if psi.len() != n || source.len() != n || u0.len() != n {
            return Err(Error::InvalidArgument(
                "obstacle data must live on the interior grid".into(),
            ));
        }
        if delta <= 0.0 || smooth_width <= 0.0 || horizon <= 0.0 {
            return Err(Error::InvalidArgument(
                "delta, smoothing width and horizon must be positive".into(),
            ));
        }
        Ok(Self {
            psi,
            source,
            u0,
            delta,
            smooth_width,
            horizon,
        })
    }

    /// The worked configuration: two paraboloid dips
    /// `psi = -4(x -+ 0.5)^2 - 4y^2` inside the circles
    /// `4(x -+ 0.5)^2 + 4y^2 < 1` and zero elsewhere, source `f = -1`,
    /// start `u0 = 0`, `delta = 1e-8`, horizon `0.5`.
    pub fn example(grid: &Grid2D) -> Self {
        let psi = grid.eval_interior(obstacle_profile);
        let f = grid.eval_interior(|_, _| -1.0);
        let u0 = DVector::zeros(grid.interior_len());
        Self::new(grid, psi, f, u0, 1e-8, 1e-10, 0.5).expect("example spec is well formed")
    }
}

/// The two-paraboloid obstacle profile.
pub fn obstacle_profile(x: f64, y: f64) -> f64 {
    let left = 4.0 * (x + 0.5) * (x + 0.5) + 4.0 * y * y;
    let right = 4.0 * (x - 0.5) * (x - 0.5) + 4.0 * y * y;
    if left < 1.0 {
        -left
    } else if right < 1.0 {
        -right
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sums_to_one_exactly() {
        let grid = Grid2D::new(20).unwrap();
        let p = build_partition(&grid, 0.1).unwrap();
        for i in 0..grid.full_len() {
            let s = p.chi[0][i] + p.chi[1][i] + p.chi[2][i] + p.chi[3][i];
            assert_eq!(s, 1.0, "node {i}");
        }
        for chi in &p.chi {
            assert!(chi.iter().all(|&c| (-1e-15..=1.0 + 1e-15).contains(&c)));
        }
    }

    #[test]
    fn ramp_midpoint_splits_evenly() {
        // At the center all four weights equal 1/4.
        let grid = Grid2D::new(19).unwrap(); // odd: (0,0) is a node
        let p = build_partition(&grid, 0.1).unwrap();
        assert_eq!(ramp(0.0, 0.1), 0.5);
        let m = grid.full_per_side();
        let center = grid.full_idx(m / 2, m / 2);
        assert!((grid.coord(m / 2)).abs() < 1e-12);
        for i in 0..4 {
            assert!((p.chi[i][center] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn lower_left_corner_belongs_to_first_subdomain() {
        let grid = Grid2D::new(20).unwrap();
        let p = build_partition(&grid, 0.1).unwrap();
        let corner = grid.full_idx(0, 0); // (-1, -1)
        assert_eq!(ramp(-1.0, 0.1), 0.0);
        assert_eq!(p.chi[0][corner], 1.0);
        assert_eq!(p.chi[1][corner], 0.0);
        assert_eq!(p.chi[2][corner], 0.0);
        assert_eq!(p.chi[3][corner], 0.0);
    }

    #[test]
    fn full_batch_weight_is_exactly_one() {
        let grid = Grid2D::new(12).unwrap();
        let p = build_partition(&grid, 0.1).unwrap();
        let w = p.batch_weight(&[0, 1, 2, 3], &[0.25; 4]);
        assert!(w.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn obstacle_vanishes_on_the_boundary_ring() {
        let grid = Grid2D::new(20).unwrap();
        let m = grid.full_per_side();
        for i in 0..m {
            for &(ix, iy) in &[(i, 0), (i, m - 1), (0, i), (m - 1, i)] {
                let v = obstacle_profile(grid.coord(ix), grid.coord(iy));
                assert!(v <= 0.0);
                assert_eq!(v, 0.0, "boundary node ({ix},{iy})");
            }
        }
    }

    #[test]
    fn obstacle_dips_inside_the_circles() {
        assert!(obstacle_profile(-0.4, 0.0) < 0.0);
        assert!(obstacle_profile(0.4, 0.0) < 0.0);
        assert_eq!(obstacle_profile(0.0, 0.9), 0.0);
    }

    #[test]
    fn grid_spacing_and_indexing() {
        let grid = Grid2D::new(20).unwrap();
        assert!((grid.spacing() - 2.0 / 21.0).abs() < 1e-16);
        assert_eq!(grid.interior_idx(1, 1), 0);
        assert_eq!(grid.interior_idx(20, 20), 399);
        assert!(Grid2D::new(3).is_err());
    }
}
