use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hawkes::poisson_draw;

/// Limit of `n β_n²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "zeta", rename_all = "snake_case")]
pub enum Regime {
    Zero,
    Finite(f64),
    Infinite,
}

impl Regime {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regime::Finite(z) if !(z > 0.0) || !z.is_finite() => {
                Err(Error::Config(format!("finite regime needs ζ > 0, got {z}")))
            }
            _ => Ok(()),
        }
    }
}

/// Tagged-particle limits driven by one path of `X̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLimitSample {
    pub regime: Regime,
    pub grid: Grid,
    pub xbar: Vec<f64>,
    /// `X_i` node series, one per tagged index.
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// `W_i(X̄(t_k))` (zero regime) or `N°_i(X̄(t_k)/ζ)` (finite regime).
    pub drivers: Vec<Vec<f64>>,
}

/// Samples `(X_i, Z_i)_{i < K}` given node values of `X̄` on `grid`.
pub fn sample_regime_limit<R: Rng + ?Sized>(
    regime: Regime,
    grid: &Grid,
    xbar: &[f64],
    tagged: usize,
    rng: &mut R,
) -> Result<RegimeLimitSample> {
    regime.validate()?;
    if xbar.len() != grid.nodes() {
        return Err(Error::Dimension { expected: grid.nodes(), got: xbar.len() });
    }
    if xbar.windows(2).any(|w| w[1] < w[0]) || xbar.first().is_some_and(|v| *v < 0.0) {
        return Err(Error::InvalidParameter("driving X̄ must be nonnegative and nondecreasing".into()));
    }
    let nodes = grid.nodes();
    let mut x = Vec::with_capacity(tagged);
    let mut z = Vec::with_capacity(tagged);
    let mut drivers = Vec::with_capacity(tagged);
    for _ in 0..tagged {
        match regime {
            Regime::Zero => {
                // W(X̄) via Gaussian increments of variance ΔX̄
                let mut w = vec![0.0; nodes];
                let mut prev = 0.0;
                for k in 0..nodes {
                    let dx = xbar[k] - prev;
                    let g: f64 = StandardNormal.sample(rng);
                    w[k] = if k == 0 { 0.0 } else { w[k - 1] } + dx.sqrt() * g;
                    prev = xbar[k];
                }
                x.push(xbar.to_vec());
                z.push(w.clone());
                drivers.push(w);
            }
            Regime::Finite(zeta) => {
                let mut count = vec![0.0; nodes];
                let mut prev = 0.0;
                for k in 0..nodes {
                    let dn = poisson_draw(rng, (xbar[k] - prev) / zeta) as f64;
                    count[k] = if k == 0 { 0.0 } else { count[k - 1] } + dn;
                    prev = xbar[k];
                }
                x.push(count.iter().map(|c| zeta * c).collect());
                z.push(count.iter().zip(xbar).map(|(c, xb)| zeta.sqrt() * (c - xb / zeta)).collect());
                drivers.push(count);
            }
            Regime::Infinite => {
                x.push(vec![0.0; nodes]);
                z.push(vec![0.0; nodes]);
                drivers.push(vec![0.0; nodes]);
            }
        }
    }
    Ok(RegimeLimitSample { regime, grid: *grid, xbar: xbar.to_vec(), x, z, drivers })
}

/// Provenance of an [`EmpiricalMeasureSnapshot`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SnapshotSource {
    Simulation { particles: usize },
    Limit { regime: Regime },
}

/// Weighted point cloud of `(x, z)` pairs at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasureSnapshot {
    pub t: f64,
    pub source: SnapshotSource,
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl EmpiricalMeasureSnapshot {
    pub fn new(t: f64, source: SnapshotSource, points: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Dimension { expected: points.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("snapshot weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("snapshot weights sum to {total}")));
        }
        Ok(Self { t, source, points, weights })
    }

    /// Equal weights `1/m`.
    pub fn uniform(t: f64, source: SnapshotSource, points: Vec<(f64, f64)>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self::new(t, source, points, weights)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn x_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn z_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    fn moments(&self, pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
        let mean: f64 = self.points.iter().zip(&self.weights).map(|(p, w)| w * pick(p)).sum();
        let var = self.points.iter().zip(&self.weights).map(|(p, w)| w * (pick(p) - mean).powi(2)).sum();
        (mean, var)
    }

    /// Weighted mean and variance of the `x` coordinate.
    pub fn x_moments(&self) -> (f64, f64) {
        self.moments(|p| p.0)
    }

    pub fn z_moments(&self) -> (f64, f64) {
        self.moments(|p| p.1)
    }

    /// CSV columns `t, index, x, z, weight`.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let header = ["t", "index", "x", "z", "weight"].map(String::from).to_vec();
        let rows = self
            .points
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(i, (p, w))| vec![self.t, i as f64, p.0, p.1, *w])
            .collect();
        (header, rows)
    }
}

/// Limit law of the empirical measure at a time where `X̄(t) = xbar`.
///
/// Zero regime: `(X̄(t), G)` with `G ~ N(0, X̄(t))`; finite regime:
/// `(ζ N°, √ζ (N° - X̄(t)/ζ))` with `N° ~ Poisson(X̄(t)/ζ)`; infinite regime: the
/// atom at `(0, 0)`.
pub fn limit_empirical_law<R: Rng + ?Sized>(
    regime: Regime,
    t: f64,
    xbar: f64,
    m: usize,
    rng: &mut R,
) -> Result<EmpiricalMeasureSnapshot> {
    regime.validate()?;
    if !(xbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("X̄(t) must be nonnegative, got {xbar}")));
    }
    let source = SnapshotSource::Limit { regime };
    match regime {
        Regime::Infinite => EmpiricalMeasureSnapshot::new(t, source, vec![(0.0, 0.0)], vec![1.0]),
        _ if m == 0 => Err(Error::InvalidParameter("limit law needs m >= 1 draws".into())),
        Regime::Zero => {
            let s = xbar.sqrt();
            let pts = (0..m)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(rng);
                    (xbar, s * g)
                })
                .collect();
            EmpiricalMeasureSnapshot::uniform(t, source, pts)
        }
        Regime::Finite(zeta) => {
            let pts = (0..m)
                .map(|_| {
                    let c = poisson_draw(rng, xbar / zeta) as f64;
                    (zeta * c, zeta.sqrt() * (c - xbar / zeta))
                })
                .collect();
            EmpiricalMeasureSnapshot::uniform(t, source, pts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ramp(g: &Grid) -> Vec<f64> {
        (0..g.nodes()).map(|k| 2.0 * g.node(k)).collect()
    }

    #[test]
    fn zero_regime_copies_driver() {
        let g = Grid::new(1.0, 0.1).unwrap();
        let xb = ramp(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = sample_regime_limit(Regime::Zero, &g, &xb, 3, &mut rng).unwrap();
        assert!(s.x.iter().all(|x| *x == xb));
        assert_ne!(s.z[0], s.z[1]);
    }

    #[test]
    fn finite_regime_is_scaled_counting_process() {
        let g = Grid::new(1.0, 0.1).unwrap();
        let xb = ramp(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let s = sample_regime_limit(Regime::Finite(0.5), &g, &xb, 2, &mut rng).unwrap();
        for (x, n) in s.x.iter().zip(&s.drivers) {
            assert!(x.iter().zip(n).all(|(a, b)| *a == 0.5 * b && b.fract() == 0.0));
        }
        assert!(sample_regime_limit(Regime::Finite(0.0), &g, &xb, 1, &mut rng).is_err());
    }

    #[test]
    fn infinite_regime_is_zero() {
        let g = Grid::new(1.0, 0.1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = sample_regime_limit(Regime::Infinite, &g, &ramp(&g), 2, &mut rng).unwrap();
        assert!(s.x.iter().chain(&s.z).all(|v| v.iter().all(|x| *x == 0.0)));
        let snap = limit_empirical_law(Regime::Infinite, 1.0, 3.0, 100, &mut rng).unwrap();
        assert_eq!(snap.points, vec![(0.0, 0.0)]);
        assert_eq!(snap.weights, vec![1.0]);
    }

    #[test]
    fn zero_regime_law_degenerates_at_zero_driver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let snap = limit_empirical_law(Regime::Zero, 1.0, 0.0, 50, &mut rng).unwrap();
        assert!(snap.z_values().iter().all(|z| *z == 0.0));
        assert!((snap.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_regime_law_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (zeta, xb, m) = (0.5, 2.0, 200_000);
        let snap = limit_empirical_law(Regime::Finite(zeta), 1.0, xb, m, &mut rng).unwrap();
        let (mean, var) = snap.x_moments();
        let se_mean = (zeta * xb / m as f64).sqrt();
        assert!((mean - xb).abs() < 4.0 * se_mean, "{mean}");
        assert!((var - zeta * xb).abs() < 0.02 * zeta * xb, "{var}");
    }
}
