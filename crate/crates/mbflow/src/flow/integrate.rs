//! Integrators: the reference gradient flow, the mini-batch descent flow
//! and the randomized minimizing movement.

use nalgebra::DVector;

use crate::convex::Potential;
use crate::error::{Error, Result};
use crate::flow::schedule::BatchSchedule;
use crate::flow::trajectory::{
    eval_grid, uniform_grid, SchemeTag, Trajectory, TrajectoryMeta, DEFAULT_GRID_NODES,
};
use crate::flow::BatchSystem;

/// Integrator options.
///
/// Segments without an exact evolver are integrated by proximal
/// (backward-Euler) sub-stepping, unconditionally stable for convex
/// potentials; the inner step is `min(epsilon / 10, inner_step_cap)`.
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Upper bound for the inner proximal step (default `1e-3`).
    pub inner_step_cap: f64,
    /// Number of uniform nodes in default output grids (default 201).
    pub grid_nodes: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            inner_step_cap: 1e-3,
            grid_nodes: DEFAULT_GRID_NODES,
        }
    }
}

impl FlowOptions {
    pub fn inner_step(&self, epsilon: f64) -> f64 {
        (epsilon / 10.0).min(self.inner_step_cap)
    }
}

fn check_domain(pot: &Potential, u0: &DVector<f64>, what: &str) -> Result<()> {
    if pot.value(u0).is_finite() {
        Ok(())
    } else {
        Err(Error::InfeasibleStart(format!(
            "initial state has infinite {what} value"
        )))
    }
}

/// Reference solution of `du/dt in -dPhi(u)` sampled on a uniform grid.
pub fn gradient_flow(
    pot: &Potential,
    u0: &DVector<f64>,
    horizon: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    let times = uniform_grid(horizon, opts.grid_nodes);
    let states = gradient_flow_at(pot, u0, &times, opts)?;
    Trajectory::new(
        times,
        states,
        SchemeTag::GradientFlow,
        TrajectoryMeta {
            inner_step: Some(opts.inner_step_cap),
            ..Default::default()
        },
    )
}

/// Gradient flow evaluated at the given sorted times (first time 0).
///
/// Uses the potential's exact evolver when available, evaluated from `u0`
/// for each node; otherwise sub-stepped proximal Euler threading the
/// requested times exactly.
pub fn gradient_flow_at(
    pot: &Potential,
    u0: &DVector<f64>,
    times: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<DVector<f64>>> {
    check_domain(pot, u0, "potential")?;
    if pot.evolve_exact(u0, 0.0).is_some() {
        return times
            .iter()
            .map(|&t| pot.evolve_exact(u0, t).expect("evolver available"))
            .collect();
    }
    prox_euler_at(pot, u0, 0.0, times, opts.inner_step_cap)
}

/// Proximal-Euler sub-stepping from `(t0, u0)` emitting states at the
/// requested times (all `>= t0`, sorted). Steps of length `h` with
/// shortened steps landing exactly on requested times.
fn prox_euler_at(
    pot: &Potential,
    u0: &DVector<f64>,
    t0: f64,
    times: &[f64],
    h: f64,
) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    let mut u = u0.clone();
    for &target in times {
        debug_assert!(target >= t0);
        while t < target {
            let dt = h.min(target - t);
            u = pot.prox(&u, dt).map_err(|e| at_time(e, t))?;
            t += dt;
        }
        out.push(u.clone());
    }
    Ok(out)
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::NonConvergence {
            iterations,
            residual,
            ..
        } => Error::ProxFailure {
            time: t,
            iterations,
            residual,
        },
        other => other,
    }
}

/// Mini-batch descent flow under a realized schedule, sampled on the union
/// of a uniform grid and the switching times.
pub fn mini_batch_flow(
    sys: &BatchSystem,
    schedule: &BatchSchedule,
    u0: &DVector<f64>,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    let times = eval_grid(schedule.horizon, schedule.epsilon, opts.grid_nodes);
    let states = mini_batch_flow_at(sys, schedule, u0, &times, opts)?;
    Trajectory::new(
        times,
        states,
        SchemeTag::MiniBatchFlow,
        TrajectoryMeta {
            epsilon: Some(schedule.epsilon),
            inner_step: Some(opts.inner_step(schedule.epsilon)),
            seed: Some(schedule.seed),
        },
    )
}

/// Mini-batch descent flow evaluated at the given sorted times.
///
/// On segment `k` the state follows the gradient flow of the drawn batch
/// potential; the segment's end state seeds the next segment, so the
/// concatenation is continuous. Exact segment evolvers are used when the
/// batch potential provides one.
pub fn mini_batch_flow_at(
    sys: &BatchSystem,
    schedule: &BatchSchedule,
    u0: &DVector<f64>,
    times: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<DVector<f64>>> {
    for j in 0..sys.num_batches() {
        check_domain(sys.batch_potential(j), u0, "batch potential")?;
    }
    let eps = schedule.epsilon;
    let h = opts.inner_step(eps);
    let mut out = Vec::with_capacity(times.len());
    let mut state = u0.clone();
    let mut next = 0usize; // index of the next requested time
    for (k, &j) in schedule.indices.iter().enumerate() {
        let t_start = k as f64 * eps;
        let t_end = (k + 1) as f64 * eps;
        let pot = sys.batch_potential(j);
        // Requested times inside [t_start, t_end) relative to segment start.
        let mut local = Vec::new();
        while next < times.len() && times[next] < t_end {
            local.push(times[next] - t_start);
            next += 1;
        }
        if pot.evolve_exact(&state, 0.0).is_some() {
            for &dt in &local {
                out.push(pot.evolve_exact(&state, dt).expect("evolver available")?);
            }
            state = pot.evolve_exact(&state, eps).expect("evolver available")?;
        } else {
            let mut wanted = local.clone();
            wanted.push(eps);
            let mut states = prox_euler_at(pot, &state, 0.0, &wanted, h)
                .map_err(|e| shift_time(e, t_start))?;
            state = states.pop().expect("segment end state");
            out.extend(states);
        }
        if next >= times.len() {
            break;
        }
    }
    // Times at or beyond the last switching time take the final state.
    while next < times.len() {
        out.push(state.clone());
        next += 1;
    }
    Ok(out)
}

fn shift_time(e: Error, offset: f64) -> Error {
    match e {
        Error::ProxFailure {
            time,
            iterations,
            residual,
        } => Error::ProxFailure {
            time: time + offset,
            iterations,
            residual,
        },
        other => other,
    }
}

/// Randomized minimizing movement: `w_k` is the prox of the drawn batch
/// potential with step `epsilon` applied to `w_{k-1}`.
pub fn minimizing_movement(
    sys: &BatchSystem,
    schedule: &BatchSchedule,
    u0: &DVector<f64>,
) -> Result<Trajectory> {
    let times = eval_grid(schedule.horizon, schedule.epsilon, DEFAULT_GRID_NODES);
    let states = minimizing_movement_at(sys, schedule, u0, &times)?;
    Trajectory::new(
        times,
        states,
        SchemeTag::MinimizingMovement,
        TrajectoryMeta {
            epsilon: Some(schedule.epsilon),
            inner_step: None,
            seed: Some(schedule.seed),
        },
    )
}

/// Minimizing movement evaluated at the given sorted times.
///
/// The embedding is piecewise constant with value `w_{k+1}` on
/// `[k epsilon, (k+1) epsilon)`; times at or beyond the last switching time
/// take the last iterate.
pub fn minimizing_movement_at(
    sys: &BatchSystem,
    schedule: &BatchSchedule,
    u0: &DVector<f64>,
    times: &[f64],
) -> Result<Vec<DVector<f64>>> {
    for j in 0..sys.num_batches() {
        check_domain(sys.batch_potential(j), u0, "batch potential")?;
    }
    let eps = schedule.epsilon;
    let mut out = Vec::with_capacity(times.len());
    let mut w = u0.clone();
    let mut next = 0usize;
    for (k, &j) in schedule.indices.iter().enumerate() {
        let t_start = k as f64 * eps;
        let t_end = (k + 1) as f64 * eps;
        w = sys
            .batch_potential(j)
            .prox(&w, eps)
            .map_err(|e| at_time(e, t_start))?;
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
