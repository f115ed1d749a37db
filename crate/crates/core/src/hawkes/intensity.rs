//! Incremental evaluation of `Σ_j Σ_{τ ∈ N_j, τ < t} φ_ij(t - τ)`.

use crate::kernel::{Kernel, KernelForm};

/// Excitation state of a self-exciting intensity, advanced forward in time.
///
/// Exponential kernels keep one decaying state per `(i, j)`; other kernels
/// re-sum over the stored history, skipping events beyond a grid kernel's support.
#[derive(Debug, Clone)]
pub struct IntensityTracker<'a> {
    kernel: &'a Kernel,
    dim: usize,
    now: f64,
    state: State,
}

#[derive(Debug, Clone)]
enum State {
    Exponential { alpha: Vec<f64>, beta: Vec<f64>, exc: Vec<f64> },
    History { events: Vec<(f64, usize)>, first_live: usize, support: f64 },
}

impl<'a> IntensityTracker<'a> {
    pub fn new(kernel: &'a Kernel) -> Self {
        let dim = kernel.dim();
        let state = match kernel.form() {
            KernelForm::Exponential { alpha, beta } => State::Exponential {
                alpha: row_major(alpha),
                beta: row_major(beta),
                exc: vec![0.0; dim * dim],
            },
            _ => State::History { events: Vec::new(), first_live: 0, support: kernel.horizon() },
        };
        Self { kernel, dim, now: 0.0, state }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Moves the clock to `t >= now`.
    pub fn advance(&mut self, t: f64) {
        debug_assert!(t >= self.now);
        let dt = t - self.now;
        self.now = t;
        match &mut self.state {
            State::Exponential { beta, exc, .. } => {
                if dt > 0.0 {
                    for (e, b) in exc.iter_mut().zip(beta.iter()) {
                        if *e != 0.0 {
                            *e *= (-b * dt).exp();
                        }
                    }
                }
            }
            State::History { events, first_live, support } => {
                while *first_live < events.len() && t - events[*first_live].0 >= *support {
                    *first_live += 1;
                }
            }
        }
    }

    /// Records an event of component `j` at the current time.
    pub fn add_event(&mut self, j: usize) {
        match &mut self.state {
            State::Exponential { alpha, exc, .. } => {
                for i in 0..self.dim {
                    exc[i * self.dim + j] += alpha[i * self.dim + j];
                }
            }
            State::History { events, .. } => events.push((self.now, j)),
        }
    }

    /// Excitation of component `i` at the current time, including events at `now`.
    pub fn excitation(&self, i: usize) -> f64 {
        match &self.state {
            State::Exponential { exc, .. } => exc[i * self.dim..(i + 1) * self.dim].iter().sum(),
            State::History { events, first_live, .. } => events[*first_live..]
                .iter()
                .map(|&(tau, j)| self.kernel.entry(i, j, self.now - tau))
                .sum(),
        }
    }

    /// `Σ_j Σ_{τ ∈ N_j, τ < now} ∫_0^{now-τ} φ_ij` from the Markov state, given the
    /// per-component event counts; `None` unless the kernel is exponential with
    /// positive rates.
    pub fn integrated_excitation(&self, i: usize, counts: &[u64]) -> Option<f64> {
        match &self.state {
            State::Exponential { alpha, beta, exc } => {
                let d = self.dim;
                let mut v = 0.0;
                for j in 0..d {
                    let (a, b) = (alpha[i * d + j], beta[i * d + j]);
                    if a == 0.0 {
                        continue;
                    }
                    if b == 0.0 {
                        return None;
                    }
                    v += (a * counts[j] as f64 - exc[i * d + j]) / b;
                }
                Some(v)
            }
            State::History { .. } => None,
        }
    }

    /// Fills `out[i]` with `baseline[i] + excitation(i)` and returns the total.
    pub fn intensities(&self, baseline: &[f64], out: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.dim {
            out[i] = baseline[i] + self.excitation(i);
            total += out[i];
        }
        total
    }
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn exponential_and_history_states_agree() {
        let k = Kernel::exponential(dmatrix![0.3, 0.1; 0.2, 0.4], dmatrix![1.0, 2.0; 0.5, 3.0]).unwrap();
        let g = Kernel::power_law(dmatrix![0.3, 0.1; 0.2, 0.4], 0.8, 0.5).unwrap();
        let events = [(0.1, 0), (0.4, 1), (0.45, 0), (1.2, 1)];
        for kern in [&k, &g] {
            let mut tr = IntensityTracker::new(kern);
            for &(t, j) in &events {
                tr.advance(t);
                tr.add_event(j);
            }
            tr.advance(2.0);
            for i in 0..2 {
                let direct: f64 = events.iter().map(|&(t, j)| kern.entry(i, j, 2.0 - t)).sum();
                assert_relative_eq!(tr.excitation(i), direct, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn grid_support_prunes_history() {
        let k = Kernel::grid(0.5, vec![dmatrix![1.0]]).unwrap();
        let mut tr = IntensityTracker::new(&k);
        tr.add_event(0);
        tr.advance(0.3);
        assert_eq!(tr.excitation(0), 1.0);
        tr.advance(0.6);
        assert_eq!(tr.excitation(0), 0.0);
    }
}
