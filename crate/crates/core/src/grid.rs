use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid on `[0, T]` with nodes `t_k = k h`, `k = 0..=m`.
///
/// Cell `k` is the half-open interval `[k h, (k + 1) h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    step: f64,
    cells: usize,
}

impl Grid {
    /// Builds a grid with `m = ceil(T / h)` cells. The last node is `m h`, which may
    /// slightly exceed `T` when `h` does not divide it.
    pub fn new(horizon: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Config(format!("grid step must be positive, got {step}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("grid horizon must be positive, got {horizon}")));
        }
        if step > horizon {
            return Err(Error::Config(format!("grid step {step} exceeds horizon {horizon}")));
        }
        // guard against 5.0 / 1e-3 = 5000.000000000001
        let ratio = horizon / step;
        let rounded = ratio.round();
        let cells = if (ratio - rounded).abs() < 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(Self { horizon, step, cells })
    }

    /// Grid with exactly `cells` cells of width `horizon / cells`.
    pub fn with_cells(horizon: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Config("grid needs at least one cell".into()));
        }
        Self::new(horizon, horizon / cells as f64).map(|mut g| {
            g.cells = cells;
            g
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of cells `m`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Number of nodes `m + 1`.
    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.step
    }

    /// Last node `m h`.
    pub fn end(&self) -> f64 {
        self.node(self.cells)
    }

    pub fn node_times(&self) -> Vec<f64> {
        (0..=self.cells).map(|k| self.node(k)).collect()
    }

    /// Index of the node closest to `t`, if `t` lies within the grid.
    pub fn nearest_node(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t > self.end() + 0.5 * self.step {
            return None;
        }
        Some(((t / self.step).round() as usize).min(self.cells))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_count_is_ceiling() {
        let g = Grid::new(5.0, 1e-3).unwrap();
        assert_eq!(g.cells(), 5000);
        assert_eq!(g.nodes(), 5001);
        let g = Grid::new(1.0, 0.3).unwrap();
        assert_eq!(g.cells(), 4);
        assert!(g.end() >= 1.0);
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(matches!(Grid::new(1.0, 0.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1.0, -1e-3), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1.0, 2.0), Err(Error::Config(_))));
    }

    #[test]
    fn nearest_node_lookup() {
        let g = Grid::new(1.0, 0.25).unwrap();
        assert_eq!(g.nearest_node(0.5), Some(2));
        assert_eq!(g.nearest_node(1.0), Some(4));
        assert_eq!(g.nearest_node(2.0), None);
    }
}
