use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `dξ = b (a - ξ) dt + σ √ξ dB`, `ξ(0) = ξ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub b: f64,
    pub a: f64,
    pub sigma: f64,
    pub xi0: f64,
}

impl CirParams {
    pub fn new(b: f64, a: f64, sigma: f64, xi0: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(b > 0.0) || !ok(b) || !ok(a) || !ok(sigma) || !ok(xi0) {
            return Err(Error::InvalidParameter(format!(
                "CIR needs b > 0 and a, σ, ξ₀ >= 0, got (b={b}, a={a}, σ={sigma}, ξ₀={xi0})"
            )));
        }
        Ok(Self { b, a, sigma, xi0 })
    }

    /// `E ξ(t)`.
    pub fn mean(&self, t: f64) -> f64 {
        let e = (-self.b * t).exp();
        self.xi0 * e + self.a * (1.0 - e)
    }

    /// `Var ξ(t)`.
    pub fn variance(&self, t: f64) -> f64 {
        let (b, s2) = (self.b, self.sigma * self.sigma);
        let e = (-b * t).exp();
        self.xi0 * s2 / b * (e - e * e) + self.a * s2 / (2.0 * b) * (1.0 - e).powi(2)
    }

    pub fn warnings(&self, grid: &Grid) -> Vec<String> {
        if self.b * grid.step() >= 1.0 {
            vec![format!("b h = {} >= 1: Euler drift overshoots", self.b * grid.step())]
        } else {
            Vec::new()
        }
    }
}

/// Node values `ξ_k⁺` of a full-truncation Euler path.
#[derive(Debug, Clone, PartialEq)]
pub struct CirPath {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl CirPath {
    /// Value at the node nearest to `t`.
    pub fn at_time(&self, t: f64) -> Result<f64> {
        self.grid
            .nearest_node(t)
            .map(|k| self.values[k])
            .ok_or(Error::OutOfRange { t, horizon: self.grid.end() })
    }
}

/// Euler with full truncation driven by the given Brownian increments (one per cell).
pub fn solve_cir_with_noise(params: &CirParams, grid: &Grid, increments: &[f64]) -> Result<CirPath> {
    if increments.len() != grid.cells() {
        return Err(Error::Dimension { expected: grid.cells(), got: increments.len() });
    }
    let h = grid.step();
    let mut values = Vec::with_capacity(grid.nodes());
    let mut xi = params.xi0;
    values.push(xi.max(0.0));
    for db in increments {
        let p = xi.max(0.0);
        xi += params.b * (params.a - p) * h + params.sigma * p.sqrt() * db;
        values.push(xi.max(0.0));
    }
    Ok(CirPath { grid: *grid, values })
}

pub fn brownian_increments<R: Rng + ?Sized>(rng: &mut R, count: usize, step: f64) -> Vec<f64> {
    let s = step.sqrt();
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            s * z
        })
        .collect()
}

pub fn solve_cir<R: Rng + ?Sized>(params: &CirParams, grid: &Grid, rng: &mut R) -> Result<CirPath> {
    let db = brownian_increments(rng, grid.cells(), grid.step());
    solve_cir_with_noise(params, grid, &db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn deterministic_case_follows_ode() {
        let p = CirParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let g = Grid::new(1.0, 1e-3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let path = solve_cir(&p, &g, &mut rng).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        assert!((path.values[g.cells()] - want).abs() < 1e-3);
        assert!((p.mean(1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn stationary_variance_formula() {
        let p = CirParams::new(1.0, 1.0, 0.5, 0.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((p.variance(1.0) - 0.125 * (1.0 - e).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CirParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(CirParams::new(1.0, -1.0, 1.0, 0.0).is_err());
        let p = CirParams::new(2000.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(p.warnings(&Grid::new(1.0, 1e-3).unwrap()).len(), 1);
    }
}
