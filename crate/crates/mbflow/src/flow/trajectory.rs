//! Time-sampled trajectories and evaluation grids.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Which scheme produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeTag {
    GradientFlow,
    MiniBatchFlow,
    MinimizingMovement,
}

/// Scheme parameters recorded alongside a trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrajectoryMeta {
    pub epsilon: Option<f64>,
    pub inner_step: Option<f64>,
    pub seed: Option<u64>,
}

/// A time grid with one state per node.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub scheme: SchemeTag,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        scheme: SchemeTag,
        meta: TrajectoryMeta,
    ) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "trajectory with {} times and {} states",
                times.len(),
                states.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "trajectory must start at t = 0, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) {
            return Err(Error::InvalidArgument(
                "trajectory states must share one dimension".into(),
            ));
        }
        Ok(Self {
            times,
            states,
            scheme,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is nonempty")
    }
}

/// Default number of uniform nodes in evaluation grids.
pub const DEFAULT_GRID_NODES: usize = 201;

/// Uniform grid of `nodes` points on `[0, T]`.
pub fn uniform_grid(horizon: f64, nodes: usize) -> Vec<f64> {
    let n = nodes.max(2);
    (0..n)
        .map(|i| i as f64 * horizon / (n - 1) as f64)
        .collect()
}

/// Error-evaluation grid: the union of a uniform grid and all switching
/// times `k epsilon` in `[0, T]`. The theorems bound a supremum over time,
/// so the grid must contain the switch points where piecewise-constant
/// embeddings jump.
pub fn eval_grid(horizon: f64, epsilon: f64, nodes: usize) -> Vec<f64> {
    let mut grid = uniform_grid(horizon, nodes);
    let mut k = 1usize;
    loop {
        let t = k as f64 * epsilon;
        if t >= horizon {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid times"));
    grid.dedup();
    grid
}
