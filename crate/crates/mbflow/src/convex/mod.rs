//! Reusable convex building blocks: proximal maps, polyhedral projection,
//! soft-thresholding, minimal-norm subgradient selections and exact
//! quadratic flows.

mod polyhedron;
mod quadratic;

pub use polyhedron::Polyhedron;
pub use quadratic::QuadraticPotential;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerance of the composite (quadratic + l1) proximal fixed-point solve.
pub const COMPOSITE_PROX_TOL: f64 = 1e-12;
/// Iteration cap of the composite proximal solve.
pub const COMPOSITE_PROX_MAX_ITER: usize = 100_000;

/// Componentwise soft threshold `sgn(x_i) max(|x_i| - tau, 0)`.
pub fn soft_threshold(x: &DVector<f64>, tau: f64) -> DVector<f64> {
    debug_assert!(tau >= 0.0);
    x.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// A convex potential from one of the shipped families.
///
/// Every variant exposes a value, a minimal-norm subgradient selection and a
/// proximal map; quadratic and l1 potentials additionally evolve their
/// gradient flow in closed form.
#[derive(Debug, Clone)]
pub enum Potential {
    /// `1/2 u'Hu + c'u + constant`.
    Quadratic(QuadraticPotential),
    /// `lambda ||u||_1`.
    L1 { dim: usize, lambda: f64 },
    /// `quad(u) + lambda ||u||_1`.
    CompositeQuadL1 {
        quad: QuadraticPotential,
        lambda: f64,
    },
    /// Indicator of a polyhedron (0 inside, +infinity outside).
    Indicator(Polyhedron),
}

impl Potential {
    pub fn quadratic(q: QuadraticPotential) -> Self {
        Potential::Quadratic(q)
    }

    pub fn l1(dim: usize, lambda: f64) -> Self {
        Potential::L1 { dim, lambda }
    }

    pub fn dim(&self) -> usize {
        match self {
            Potential::Quadratic(q) => q.dim(),
            Potential::L1 { dim, .. } => *dim,
            Potential::CompositeQuadL1 { quad, .. } => quad.dim(),
            Potential::Indicator(p) => p.dim(),
        }
    }

    /// Potential value; `+infinity` outside the effective domain.
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        match self {
            Potential::Quadratic(q) => q.value(u),
            Potential::L1 { lambda, .. } => lambda * u.iter().map(|v| v.abs()).sum::<f64>(),
            Potential::CompositeQuadL1 { quad, lambda } => {
                quad.value(u) + lambda * u.iter().map(|v| v.abs()).sum::<f64>()
            }
            Potential::Indicator(p) => {
                if p.contains(u) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The least-norm element of the subdifferential at `u`.
    ///
    /// For `smooth g + lambda ||.||_1` the selection at a zero coordinate is
    /// `theta_i = clamp(-g_i / lambda, -1, 1)`, the exact minimizer of
    /// `||g + lambda theta||` over the unit box.
    pub fn min_norm_subgradient(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Potential::Quadratic(q) => q.gradient(u),
            Potential::L1 { dim, lambda } => {
                let mut g = DVector::zeros(*dim);
                for i in 0..*dim {
                    if u[i] != 0.0 {
                        g[i] = lambda * u[i].signum();
                    }
                }
                g
            }
            Potential::CompositeQuadL1 { quad, lambda } => {
                let g = quad.gradient(u);
                let theta = l1_min_norm_selection(u, &g, *lambda);
                g + theta * *lambda
            }
            Potential::Indicator(p) => p.min_norm_with_normal_cone(u, &DVector::zeros(p.dim())),
        }
    }

    /// Proximal map `argmin_w value(w) + ||w - x||^2 / (2 tau)`.
    ///
    /// Closed form for quadratic (resolvent), l1 (soft threshold) and
    /// indicator (projection); the composite family iterates a damped
    /// forward-backward fixed point to [`COMPOSITE_PROX_TOL`].
    pub fn prox(&self, x: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
        if tau <= 0.0 {
            return Err(Error::InvalidArgument(format!("prox step {tau} <= 0")));
        }
        match self {
            Potential::Quadratic(q) => Ok(q.prox(x, tau)),
            Potential::L1 { lambda, .. } => Ok(soft_threshold(x, tau * lambda)),
            Potential::CompositeQuadL1 { quad, lambda } => {
                composite_prox(quad, *lambda, x, tau)
            }
            Potential::Indicator(p) => p.project(x),
        }
    }

    /// Exact gradient-flow evolution over duration `t` where available.
    ///
    /// Quadratic potentials decay in the eigenbasis; the l1 flow shrinks
    /// every component linearly toward zero at rate `lambda` and sticks
    /// there; an indicator leaves feasible states untouched. Composite
    /// potentials return `None` and are integrated by proximal sub-stepping.
    pub fn evolve_exact(&self, u0: &DVector<f64>, t: f64) -> Option<Result<DVector<f64>>> {
        match self {
            Potential::Quadratic(q) => Some(q.evolve(u0, t)),
            Potential::L1 { lambda, .. } => Some(Ok(soft_threshold(u0, lambda * t))),
            Potential::CompositeQuadL1 { .. } => None,
            Potential::Indicator(p) => Some(if p.contains(u0) {
                Ok(u0.clone())
            } else {
                Err(Error::InfeasibleStart(format!(
                    "state violates the polyhedron by {:.3e}",
                    p.violation(u0)
                )))
            }),
        }
    }

    /// Weighted combination `sum_i coeff_i * pot_i` with positive
    /// coefficients, used to form batch potentials. Quadratic and l1 parts
    /// merge; an indicator may only appear alone (its positive scalings all
    /// equal itself).
    pub fn combine(terms: &[(f64, &Potential)]) -> Result<Potential> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty potential combination".into()));
        }
        if terms.iter().any(|(w, _)| *w <= 0.0) {
            return Err(Error::InvalidArgument(
                "combination coefficients must be positive".into(),
            ));
        }
        if let Some((_, Potential::Indicator(p))) = terms
            .iter()
            .find(|(_, p)| matches!(p, Potential::Indicator(_)))
        {
            if terms.len() > 1 {
                return Err(Error::Unsupported(
                    "indicator potentials cannot be mixed into a batch combination".into(),
                ));
            }
            return Ok(Potential::Indicator(p.clone()));
        }
        let dim = terms[0].1.dim();
        let mut quads: Vec<(f64, &QuadraticPotential)> = Vec::new();
        let mut lambda = 0.0;
        for (w, p) in terms {
            match p {
                Potential::Quadratic(q) => quads.push((*w, q)),
                Potential::L1 { lambda: l, .. } => lambda += w * l,
                Potential::CompositeQuadL1 { quad, lambda: l } => {
                    quads.push((*w, quad));
                    lambda += w * l;
                }
                Potential::Indicator(_) => unreachable!(),
            }
        }
        let quad = if quads.is_empty() {
            None
        } else {
            Some(QuadraticPotential::weighted_sum(&quads)?)
        };
        Ok(match (quad, lambda) {
            (Some(q), l) if l == 0.0 => Potential::Quadratic(q),
            (Some(q), l) => Potential::CompositeQuadL1 { quad: q, lambda: l },
            (None, l) => Potential::L1 { dim, lambda: l },
        })
    }
}

/// Minimal-norm l1 selection `theta` for a composite `g + lambda ||.||_1`:
/// `sgn(u_i)` off zero, `clamp(-g_i/lambda, -1, 1)` at zero.
pub fn l1_min_norm_selection(u: &DVector<f64>, g: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let mut theta = DVector::zeros(u.len());
    for i in 0..u.len() {
        theta[i] = if u[i] != 0.0 {
            u[i].signum()
        } else if lambda > 0.0 {
            (-g[i] / lambda).clamp(-1.0, 1.0)
        } else {
            0.0
        };
    }
    theta
}

/// Composite prox by forward-backward iteration on the strongly convex
/// objective `quad(w) + lambda||w||_1 + ||w - x||^2/(2 tau)`.
fn composite_prox(
    quad: &QuadraticPotential,
    lambda: f64,
    x: &DVector<f64>,
    tau: f64,
) -> Result<DVector<f64>> {
    let lip = quad.max_eigenvalue() + 1.0 / tau;
    let step = 1.0 / lip;
    let mut w = x.clone();
    for _ in 0..COMPOSITE_PROX_MAX_ITER {
        let grad = quad.gradient(&w) + (&w - x) / tau;
        let next = soft_threshold(&(&w - &grad * step), step * lambda);
        let delta = (&next - &w).amax();
        w = next;
        if delta <= COMPOSITE_PROX_TOL {
            return Ok(w);
        }
    }
    Err(Error::NonConvergence {
        solver: "composite prox",
        iterations: COMPOSITE_PROX_MAX_ITER,
        residual: f64::NAN,
    })
}
