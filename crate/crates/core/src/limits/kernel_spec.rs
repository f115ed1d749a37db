use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{BernsteinTriplet, Matrix};
use crate::resolvent::ResolventTable;
use crate::special::mittag_leffler_neg;

use super::CirParams;

/// Normalizing constant of the fractional kernel `t^{α-1} / Γ(·)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FractionalNormalization {
    /// `Γ(1 - α)`, as written in the heavy-tail limit display.
    #[default]
    GammaOneMinusAlpha,
    /// `Γ(α)`, the Riemann-Liouville convention.
    GammaAlpha,
}

/// Where a [`LimitKernelSpec`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum KernelProvenance {
    /// `1/Φ` with `Φ(z) = m + λ z^α` (`α = 1` for the light tail).
    Triplet { m: f64, lambda: f64, alpha: f64 },
    Fractional { alpha: f64, normalization: FractionalNormalization },
    Resolvent { n: u64, beta_n: f64 },
}

/// Limit kernel `f` (cell averages) and `F(t) = ∫_0^t f` (nodes) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitKernelSpec {
    grid: Grid,
    dim: usize,
    /// `cells x d x d`
    f_cells: Vec<f64>,
    /// `nodes x d x d`
    cdf: Vec<f64>,
    provenance: KernelProvenance,
}

impl LimitKernelSpec {
    /// Builds from a distribution function; cell averages are exact increments.
    fn from_cdf(grid: &Grid, cdf: impl Fn(f64) -> f64, provenance: KernelProvenance) -> Result<Self> {
        let nodes: Vec<f64> = (0..grid.nodes()).map(|k| cdf(grid.node(k))).collect();
        let f_cells: Vec<f64> = nodes.windows(2).map(|w| (w[1] - w[0]) / grid.step()).collect();
        Self::new(*grid, 1, f_cells, nodes, provenance)
    }

    pub fn new(grid: Grid, dim: usize, f_cells: Vec<f64>, cdf: Vec<f64>, provenance: KernelProvenance) -> Result<Self> {
        let dd = dim * dim;
        if f_cells.len() != grid.cells() * dd || cdf.len() != grid.nodes() * dd {
            return Err(Error::Dimension { expected: grid.cells() * dd, got: f_cells.len() });
        }
        if f_cells.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("limit kernel cells must be finite and nonnegative".into()));
        }
        Ok(Self { grid, dim, f_cells, cdf, provenance })
    }

    /// From a Bernstein triplet whose `Φ` has the closed form `m + λ z^α`.
    pub fn from_triplet(triplet: &BernsteinTriplet, grid: &Grid) -> Result<Self> {
        let (m, lambda, alpha) = triplet.closed_form().ok_or_else(|| {
            Error::Unsupported("no closed-form inverse for this Bernstein triplet".into())
        })?;
        if !(lambda > 0.0) {
            return Err(Error::Domain("Φ needs a positive z-coefficient to define a density".into()));
        }
        let prov = KernelProvenance::Triplet { m, lambda, alpha };
        if alpha == 1.0 {
            if m > 0.0 {
                Self::from_cdf(grid, |t| -(-m * t / lambda).exp_m1() / m, prov)
            } else {
                Self::from_cdf(grid, |t| t / lambda, prov)
            }
        } else if m > 0.0 {
            Self::from_cdf(grid, |t| (1.0 - mittag_leffler_neg(alpha, m / lambda * t.powf(alpha))) / m, prov)
        } else {
            let c = lambda * gamma(alpha + 1.0);
            Self::from_cdf(grid, |t| t.powf(alpha) / c, prov)
        }
    }

    /// `f(t) = t^{α-1} / Γ(·)`, `α ∈ (1/2, 1)`.
    pub fn fractional(alpha: f64, normalization: FractionalNormalization, grid: &Grid) -> Result<Self> {
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("fractional order must lie in (1/2, 1), got {alpha}")));
        }
        let g = match normalization {
            FractionalNormalization::GammaOneMinusAlpha => gamma(1.0 - alpha),
            FractionalNormalization::GammaAlpha => gamma(alpha),
        };
        Self::from_cdf(
            grid,
            |t| t.powf(alpha) / (alpha * g),
            KernelProvenance::Fractional { alpha, normalization },
        )
    }

    /// From the scaled measure `Fⁿ` attached to a resolvent table.
    pub fn from_resolvent(table: &ResolventTable) -> Result<Self> {
        let s = table
            .scaled
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("resolvent table carries no scaled measure".into()))?;
        Self::new(
            *table.grid(),
            table.dim(),
            s.density.clone(),
            s.cumulative.clone(),
            KernelProvenance::Resolvent { n: s.n, beta_n: s.beta_n },
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> &KernelProvenance {
        &self.provenance
    }

    pub fn f_cell(&self, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.f_cells[k * dd..(k + 1) * dd]
    }

    pub fn cdf_node(&self, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.cdf[k * dd..(k + 1) * dd]
    }

    pub fn cdf_matrix(&self, k: usize) -> Matrix {
        Matrix::from_row_slice(self.dim, self.dim, self.cdf_node(k))
    }

    /// Largest gap between `F(t_k)` and the running sum of cell averages.
    pub fn consistency_error(&self) -> f64 {
        let dd = self.dim * self.dim;
        let h = self.grid.step();
        let mut acc = vec![0.0; dd];
        let mut worst: f64 = 0.0;
        for k in 0..self.grid.cells() {
            for e in 0..dd {
                acc[e] += h * self.f_cells[k * dd + e];
                let gap = (acc[e] - (self.cdf[(k + 1) * dd + e] - self.cdf[e])).abs();
                worst = worst.max(gap);
            }
        }
        worst
    }

    /// CSV columns `t, f_ij.., F_ij..` (cell values at their left node; last node repeats).
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let d = self.dim;
        let mut header = vec!["t".to_string()];
        for prefix in ["f", "F"] {
            header.extend((0..d).flat_map(|i| (0..d).map(move |j| format!("{prefix}_{i}{j}"))));
        }
        let rows = (0..self.grid.nodes())
            .map(|k| {
                let mut row = vec![self.grid.node(k)];
                row.extend_from_slice(self.f_cell(k.min(self.grid.cells() - 1)));
                row.extend_from_slice(self.cdf_node(k));
                row
            })
            .collect();
        (header, rows)
    }
}

/// CIR coefficients equivalent to the SVE with `L_F = 1/(m + λ z)` and level `a`:
/// `b = m/λ`, long-run level `a/m`, `σ = 1/λ`, `ξ₀ = 0`.
pub fn cir_correspondence(m: f64, lambda: f64, a: f64) -> Result<CirParams> {
    if !(m > 0.0) || !(lambda > 0.0) {
        return Err(Error::Domain(format!("CIR correspondence needs m, λ > 0, got ({m}, {lambda})")));
    }
    CirParams::new(m / lambda, a / m, 1.0 / lambda, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::LevyMeasure;
    use approx::assert_relative_eq;

    #[test]
    fn light_tail_closed_form() {
        let g = Grid::new(2.0, 0.01).unwrap();
        let t = BernsteinTriplet::new(2.0, 0.5, LevyMeasure::None).unwrap();
        let s = LimitKernelSpec::from_triplet(&t, &g).unwrap();
        // f(t) = 2 e^{-4t}
        let k = 50;
        let avg = 2.0 * ((-4.0 * g.node(k)).exp() - (-4.0 * g.node(k + 1)).exp()) / (4.0 * 0.01);
        assert_relative_eq!(s.f_cell(k)[0], avg, epsilon = 1e-12);
        assert!(s.consistency_error() < 1e-12);
        assert_relative_eq!(s.cdf_node(g.cells())[0], 0.5 * (1.0 - (-8.0f64).exp()), epsilon = 1e-12);
    }

    #[test]
    fn heavy_tail_matches_fractional_when_m_vanishes() {
        let g = Grid::new(1.0, 0.01).unwrap();
        let alpha = 0.75;
        let lambda = 1.0;
        let t = BernsteinTriplet::new(0.0, 0.0, LevyMeasure::stable_with_symbol(lambda, alpha).unwrap()).unwrap();
        let a = LimitKernelSpec::from_triplet(&t, &g).unwrap();
        let b = LimitKernelSpec::fractional(alpha, FractionalNormalization::GammaAlpha, &g).unwrap();
        for k in [0, 10, 99] {
            assert_relative_eq!(a.f_cell(k)[0], b.f_cell(k)[0], max_relative = 1e-9);
        }
    }

    #[test]
    fn heavy_tail_with_drift_is_monotone() {
        let g = Grid::new(5.0, 0.01).unwrap();
        let t = BernsteinTriplet::new(1.0, 0.0, LevyMeasure::stable_with_symbol(0.8, 0.7).unwrap()).unwrap();
        let s = LimitKernelSpec::from_triplet(&t, &g).unwrap();
        let last = s.cdf_node(g.cells())[0];
        assert!(last < 1.0 && last > 0.8);
        assert!((0..g.nodes() - 1).all(|k| s.cdf_node(k + 1)[0] >= s.cdf_node(k)[0]));
    }

    #[test]
    fn fractional_first_cell_is_exact_integral() {
        let g = Grid::new(1.0, 0.1).unwrap();
        let s = LimitKernelSpec::fractional(0.75, FractionalNormalization::default(), &g).unwrap();
        let want = 0.1f64.powf(0.75) / (0.75 * gamma(0.25)) / 0.1;
        assert_relative_eq!(s.f_cell(0)[0], want, epsilon = 1e-12);
        assert!(LimitKernelSpec::fractional(0.4, FractionalNormalization::default(), &g).is_err());
    }

    #[test]
    fn correspondence() {
        let p = cir_correspondence(1.0, 0.5, 2.0).unwrap();
        assert_eq!((p.b, p.a, p.sigma, p.xi0), (2.0, 2.0, 2.0, 0.0));
    }
}
