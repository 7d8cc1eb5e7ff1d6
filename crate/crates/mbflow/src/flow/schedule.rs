//! Realized batch schedules: the i.i.d. sequence of batch indices drawn
//! with probabilities `pi`, switching every `epsilon` time units.

use crate::error::{Error, Result};
use crate::flow::rng::CounterRng;

/// The realized sequence `j_1..j_K` (0-based indices) with switching times
/// `t_k = k epsilon` and `K = ceil(T / epsilon)`.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    pub epsilon: f64,
    pub horizon: f64,
    pub indices: Vec<usize>,
    pub seed: u64,
}

impl BatchSchedule {
    pub fn num_segments(&self) -> usize {
        self.indices.len()
    }

    /// Switching time `t_k = k epsilon` (with `t_K` clamped to the horizon
    /// only implicitly: segments may overhang `T`).
    pub fn switch_time(&self, k: usize) -> f64 {
        k as f64 * self.epsilon
    }

    /// Index of the segment containing time `t`, i.e. `k_t - 1` in 0-based
    /// form, clamped to the last drawn segment at `t >= K epsilon`.
    pub fn segment_of(&self, t: f64) -> usize {
        let k = (t / self.epsilon).floor() as usize;
        k.min(self.indices.len().saturating_sub(1))
    }
}

/// Draws `K = ceil(T/epsilon)` i.i.d. batch indices by inverse CDF over the
/// cumulative probabilities; ties on a CDF boundary resolve to the lower
/// index. Deterministic in `(pi, epsilon, T, seed)`.
pub fn draw_schedule_probs(
    pi: &[f64],
    epsilon: f64,
    horizon: f64,
    seed: u64,
) -> Result<BatchSchedule> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "switching period epsilon = {epsilon} must be positive"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon T = {horizon} must be positive"
        )));
    }
    if epsilon > horizon {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {epsilon} exceeds horizon T = {horizon}"
        )));
    }
    let mut cdf = Vec::with_capacity(pi.len());
    let mut acc = 0.0;
    for &p in pi {
        acc += p;
        cdf.push(acc);
    }
    let k = (horizon / epsilon).ceil() as usize;
    let rng = CounterRng::new(seed);
    let indices = (0..k)
        .map(|draw| {
            let u = rng.uniform(draw as u64);
            cdf.iter().position(|&c| u <= c).unwrap_or(pi.len() - 1)
        })
        .collect();
    Ok(BatchSchedule {
        epsilon,
        horizon,
        indices,
        seed,
    })
}
