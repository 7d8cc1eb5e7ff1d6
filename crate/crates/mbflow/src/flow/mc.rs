//! Monte-Carlo error statistics and convergence-order sweeps.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::integrate::{
    gradient_flow_at, mini_batch_flow_at, minimizing_movement_at, FlowOptions,
};
use crate::flow::schedule::{draw_schedule_probs, BatchSchedule};
use crate::flow::trajectory::eval_grid;
use crate::flow::BatchSystem;

/// Sup errors below this threshold flag a sweep as degenerate (all noise).
pub const DEGENERATE_SUP_TOL: f64 = 1e-16;

/// Randomized scheme driven by a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    MiniBatchFlow,
    MinimizingMovement,
}

/// Mean squared deviation from the reference per time node, with standard
/// errors across realizations.
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `sup_t` of the mean squared error.
    pub sup_mean_sq: f64,
    /// Standard error at the node attaining the supremum.
    pub sup_std_err: f64,
    pub realizations: usize,
}

/// Generic Monte-Carlo error engine.
///
/// Draws one schedule per realization with seed `base_seed + r`, evaluates
/// `sq_scale * ||v_r(t) - reference(t)||^2` on the shared grid and averages.
/// Realizations may run concurrently; the aggregation always proceeds in
/// realization-index order, so results are bitwise independent of the thread
/// count. `sq_scale` turns Euclidean norms into grid norms where needed.
pub fn expectation_error_with<F>(
    times: &[f64],
    reference: &[DVector<f64>],
    pi: &[f64],
    epsilon: f64,
    horizon: f64,
    realizations: usize,
    base_seed: u64,
    sq_scale: f64,
    realize: F,
) -> Result<ErrorCurve>
where
    F: Fn(&BatchSchedule) -> Result<Vec<DVector<f64>>> + Sync,
{
    if realizations == 0 {
        return Err(Error::InvalidArgument("realization count 0".into()));
    }
    if times.len() != reference.len() {
        return Err(Error::InvalidArgument(format!(
            "{} grid times but {} reference states",
            times.len(),
            reference.len()
        )));
    }
    let curves: Vec<Vec<f64>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r as u64);
            let run = || -> Result<Vec<f64>> {
                let schedule = draw_schedule_probs(pi, epsilon, horizon, seed)?;
                let states = realize(&schedule)?;
                Ok(states
                    .iter()
                    .zip(reference)
                    .map(|(v, u)| sq_scale * (v - u).norm_squared())
                    .collect())
            };
            run().map_err(|e| Error::Realization {
                realization: r,
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = times.len();
    let mut mean = vec![0.0; n];
    for curve in &curves {
        for (m, &v) in mean.iter_mut().zip(curve) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= realizations as f64;
    }
    let mut std_err = vec![0.0; n];
    if realizations >= 2 {
        for curve in &curves {
            for i in 0..n {
                let d = curve[i] - mean[i];
                std_err[i] += d * d;
            }
        }
        for s in &mut std_err {
            *s = (*s / (realizations as f64 - 1.0)).sqrt() / (realizations as f64).sqrt();
        }
    }
    let (sup_idx, sup) = mean
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(ErrorCurve {
        times: times.to_vec(),
        mean_sq: mean,
        std_err: std_err.clone(),
        sup_mean_sq: sup,
        sup_std_err: std_err[sup_idx],
        realizations,
    })
}

/// Runs `R` independent realizations of the selected scheme against the
/// reference gradient flow of the full potential.
pub fn expectation_error(
    sys: &BatchSystem,
    u0: &DVector<f64>,
    horizon: f64,
    epsilon: f64,
    realizations: usize,
    base_seed: u64,
    scheme: Scheme,
    opts: &FlowOptions,
) -> Result<ErrorCurve> {
    if realizations < 2 {
        return Err(Error::InvalidArgument(format!(
            "expectation error needs R >= 2 realizations, got {realizations}"
        )));
    }
    let times = eval_grid(horizon, epsilon, opts.grid_nodes);
    let reference = gradient_flow_at(sys.total_potential(), u0, &times, opts)?;
    expectation_error_with(
        &times,
        &reference,
        sys.batch_probs(),
        epsilon,
        horizon,
        realizations,
        base_seed,
        1.0,
        |schedule| match scheme {
            Scheme::MiniBatchFlow => mini_batch_flow_at(sys, schedule, u0, &times, opts),
            Scheme::MinimizingMovement => minimizing_movement_at(sys, schedule, u0, &times),
        },
    )
}

/// Per-epsilon sup errors plus the fitted log-log slope.
#[derive(Debug, Clone)]
pub struct EpsilonError {
    pub epsilon: f64,
    pub sup_mean_sq: f64,
    pub std_err: f64,
}

/// Monte-Carlo convergence report over a decreasing epsilon list.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub entries: Vec<EpsilonError>,
    pub curves: Vec<ErrorCurve>,
    /// OLS slope of `log sup_mse` against `log epsilon`; `None` when the
    /// fit is degenerate (all errors at noise level).
    pub slope: Option<f64>,
    pub slope_std_err: Option<f64>,
    pub degenerate: bool,
    pub realizations: usize,
    pub base_seed: u64,
}

impl ConvergenceReport {
    /// Assembles the report and fits the slope unless every sup error sits
    /// below the degeneracy threshold.
    pub fn assemble(
        curves: Vec<ErrorCurve>,
        epsilons: &[f64],
        realizations: usize,
        base_seed: u64,
    ) -> Self {
        let entries: Vec<EpsilonError> = epsilons
            .iter()
            .zip(&curves)
            .map(|(&epsilon, c)| EpsilonError {
                epsilon,
                sup_mean_sq: c.sup_mean_sq,
                std_err: c.sup_std_err,
            })
            .collect();
        let degenerate = entries.iter().all(|e| e.sup_mean_sq < DEGENERATE_SUP_TOL);
        let (slope, slope_std_err) = if degenerate {
            (None, None)
        } else {
            let xs: Vec<f64> = entries.iter().map(|e| e.epsilon.ln()).collect();
            let ys: Vec<f64> = entries.iter().map(|e| e.sup_mean_sq.ln()).collect();
            let (s, se) = fit_loglog(&xs, &ys);
            (Some(s), Some(se))
        };
        Self {
            entries,
            curves,
            slope,
            slope_std_err,
            degenerate,
            realizations,
            base_seed,
        }
    }

    /// Slope in the non-squared error, exactly half the squared-error slope.
    pub fn error_slope(&self) -> Option<f64> {
        self.slope.map(|s| s / 2.0)
    }
}

/// One `expectation_error` run per epsilon plus a least-squares slope of
/// `log sup_mse` against `log epsilon`.
pub fn convergence_sweep(
    sys: &BatchSystem,
    u0: &DVector<f64>,
    horizon: f64,
    epsilons: &[f64],
    realizations: usize,
    base_seed: u64,
    scheme: Scheme,
    opts: &FlowOptions,
) -> Result<ConvergenceReport> {
    check_epsilon_list(epsilons)?;
    let curves = epsilons
        .iter()
        .map(|&eps| {
            expectation_error(sys, u0, horizon, eps, realizations, base_seed, scheme, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::assemble(
        curves,
        epsilons,
        realizations,
        base_seed,
    ))
}

/// Sweeps require at least three strictly decreasing epsilons.
pub fn check_epsilon_list(epsilons: &[f64]) -> Result<()> {
    if epsilons.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "epsilon list needs length >= 3, got {}",
            epsilons.len()
        )));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "epsilon list must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Ordinary least squares for `y = a + b x`; returns `(b, stderr(b))`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let dof = (xs.len().saturating_sub(2)).max(1) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();
    (slope, stderr)
}
