//! Polyhedra `{u : a_k . u <= b_k}` with exact projection by active-set
//! enumeration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Numerical slack used in feasibility checks.
const FEAS_TOL: f64 = 1e-10;

/// A polyhedron described by inequality rows `a_k . u <= b_k`.
///
/// Intended for desk-scale constraint counts (the projection enumerates
/// subsets of constraints, so `K <= ~8`). Nonemptiness is verified at
/// construction by projecting the origin.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    rows: DMatrix<f64>,
    bounds: DVector<f64>,
}

impl Polyhedron {
    pub fn new(rows: DMatrix<f64>, bounds: DVector<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.nrows() != bounds.len() {
            return Err(Error::InvalidArgument(format!(
                "polyhedron needs K >= 1 consistent rows, got {} rows and {} bounds",
                rows.nrows(),
                bounds.len()
            )));
        }
        let p = Self { rows, bounds };
        // One projection solve from the origin doubles as the nonemptiness check.
        p.project(&DVector::zeros(p.dim()))?;
        Ok(p)
    }

    /// The feasible set of the constrained case study:
    /// `5u1 + 3u2 <= 120`, `4u1 + 6u2 <= 150`, `u1 - 2u2 <= 0`,
    /// `u1 >= 7`, `u2 <= 15`.
    pub fn example_feasible_set() -> Self {
        let rows = DMatrix::from_row_slice(
            5,
            2,
            &[5.0, 3.0, 4.0, 6.0, 1.0, -2.0, -1.0, 0.0, 0.0, 1.0],
        );
        let bounds = DVector::from_vec(vec![120.0, 150.0, 0.0, -7.0, 15.0]);
        Self::new(rows, bounds).expect("example feasible set is nonempty")
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.nrows()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn bounds(&self) -> &DVector<f64> {
        &self.bounds
    }

    /// Maximum constraint violation, negative inside the polyhedron.
    pub fn violation(&self, u: &DVector<f64>) -> f64 {
        let r = &self.rows * u - &self.bounds;
        r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        self.violation(u) <= FEAS_TOL
    }

    /// Indices of constraints active at `u` within `tol`.
    pub fn active_set(&self, u: &DVector<f64>, tol: f64) -> Vec<usize> {
        let r = &self.rows * u - &self.bounds;
        (0..r.len()).filter(|&k| r[k].abs() <= tol).collect()
    }

    /// Euclidean projection onto the polyhedron.
    ///
    /// Enumerates candidate active sets; a candidate `u = x - A_S' mu` is the
    /// projection iff it is primal feasible and `mu >= 0` (the KKT system of
    /// the nearest-point problem). Subsets with singular Gram matrices are
    /// skipped: the active set of the true projection can always be thinned
    /// to an independent one.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.contains(x) {
            return Ok(x.clone());
        }
        let k = self.num_constraints();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 1u32..(1 << k) {
            let subset: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            if let Some(cand) = self.project_on_active(x, &subset) {
                let d = (x - &cand).norm_squared();
                if best.as_ref().map(|(bd, _)| d < *bd).unwrap_or(true) {
                    best = Some((d, cand));
                }
            }
        }
        best.map(|(_, u)| u).ok_or(Error::EmptyPolyhedron {
            constraints: self.num_constraints(),
        })
    }

    /// KKT candidate with the given constraints active; `None` if the Gram
    /// system is singular, a multiplier is negative, or the point infeasible.
    fn project_on_active(&self, x: &DVector<f64>, subset: &[usize]) -> Option<DVector<f64>> {
        let a = self.rows.select_rows(subset.iter());
        let b = DVector::from_iterator(subset.len(), subset.iter().map(|&i| self.bounds[i]));
        let gram = &a * a.transpose();
        let rhs = &a * x - b;
        let mu = gram.lu().solve(&rhs)?;
        if mu.iter().any(|&m| m < -FEAS_TOL) {
            return None;
        }
        let u = x - a.transpose() * mu;
        self.contains(&u).then_some(u)
    }

    /// Least-norm element of `g + N_C(u)` where `N_C(u)` is the normal cone
    /// at `u`: resolves `min_{mu >= 0} ||g + A_act' mu||` by enumerating
    /// supports of `mu` over the active constraints.
    pub fn min_norm_with_normal_cone(&self, u: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        let active = self.active_set(u, FEAS_TOL);
        if active.is_empty() {
            return g.clone();
        }
        let mut best = g.clone();
        let mut best_sq = g.norm_squared();
        let na = active.len();
        for mask in 1u32..(1 << na) {
            let subset: Vec<usize> = (0..na)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| active[i])
                .collect();
            let a = self.rows.select_rows(subset.iter());
            let gram = &a * a.transpose();
            let rhs = -(&a * g);
            let Some(mu) = gram.lu().solve(&rhs) else {
                continue;
            };
            if mu.iter().any(|&m| m < -FEAS_TOL) {
                continue;
            }
            let cand = g + a.transpose() * mu;
            let sq = cand.norm_squared();
            if sq < best_sq {
                best_sq = sq;
                best = cand;
            }
        }
        best
    }
}
