use rand::Rng;

use super::cir::brownian_increments;
use super::LimitKernelSpec;
use crate::error::{Error, Result};

/// Discretized solution of `Y(t) = F(t) a + ∫_0^t f(t-s) √diag(Y(s)) dB(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvePath {
    pub grid: crate::grid::Grid,
    pub dim: usize,
    /// `Y_k⁺`, `nodes x d`.
    pub y: Vec<f64>,
    /// Scheme iterate `Y_k` before truncation; `E Y_k = F(t_k) a` exactly.
    pub y_raw: Vec<f64>,
    /// `X(t_k) = ∫_0^{t_k} Y⁺` by the trapezoid rule.
    pub x: Vec<f64>,
    /// `Z_k = Σ_{j<k} √Y_j⁺ ΔB_j`.
    pub z: Vec<f64>,
    /// Brownian increments, `cells x d`.
    pub increments: Vec<f64>,
}

impl SvePath {
    pub fn y_at(&self, k: usize, i: usize) -> f64 {
        self.y[k * self.dim + i]
    }

    pub fn x_at(&self, k: usize, i: usize) -> f64 {
        self.x[k * self.dim + i]
    }

    pub fn z_at(&self, k: usize, i: usize) -> f64 {
        self.z[k * self.dim + i]
    }

    /// Node series of component `i`.
    pub fn x_component(&self, i: usize) -> Vec<f64> {
        (0..self.grid.nodes()).map(|k| self.x_at(k, i)).collect()
    }

    pub fn y_component(&self, i: usize) -> Vec<f64> {
        (0..self.grid.nodes()).map(|k| self.y_at(k, i)).collect()
    }

    /// CSV columns `t, Y_i.., X_i.., Z_i..`.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let d = self.dim;
        let mut header = vec!["t".to_string()];
        for prefix in ["Y", "X", "Z"] {
            header.extend((0..d).map(|i| format!("{prefix}_{i}")));
        }
        let rows = (0..self.grid.nodes())
            .map(|k| {
                let mut row = vec![self.grid.node(k)];
                for field in [&self.y, &self.x, &self.z] {
                    row.extend_from_slice(&field[k * d..(k + 1) * d]);
                }
                row
            })
            .collect();
        (header, rows)
    }
}

/// Truncated Volterra Euler scheme driven by the given increments (`cells x d`).
///
/// `Y_k = F(t_k) a + Σ_{j<k} f̄_{k-1-j} √diag(Y_j⁺) ΔB_j` where `f̄_m` is the
/// average of `f` over `[m h, (m+1) h)`.
pub fn solve_sve_with_noise(spec: &LimitKernelSpec, a: &[f64], increments: &[f64]) -> Result<SvePath> {
    let d = spec.dim();
    let grid = *spec.grid();
    let cells = grid.cells();
    if a.len() != d {
        return Err(Error::Dimension { expected: d, got: a.len() });
    }
    if increments.len() != cells * d {
        return Err(Error::Dimension { expected: cells * d, got: increments.len() });
    }
    if a.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("SVE level a must be nonnegative".into()));
    }
    let nodes = grid.nodes();
    let mut y = vec![0.0; nodes * d];
    let mut y_raw = vec![0.0; nodes * d];
    // σ_j ΔB_j = √Y_j⁺ ΔB_j per cell
    let mut noise = vec![0.0; cells * d];
    for k in 0..nodes {
        let cdf = spec.cdf_node(k);
        for i in 0..d {
            let mut v: f64 = (0..d).map(|l| cdf[i * d + l] * a[l]).sum();
            for j in 0..k {
                let f = spec.f_cell(k - 1 - j);
                let nz = &noise[j * d..(j + 1) * d];
                if d == 1 {
                    v += f[0] * nz[0];
                } else {
                    for l in 0..d {
                        v += f[i * d + l] * nz[l];
                    }
                }
            }
            y_raw[k * d + i] = v;
            y[k * d + i] = v.max(0.0);
        }
        if k < cells {
            for i in 0..d {
                noise[k * d + i] = y[k * d + i].sqrt() * increments[k * d + i];
            }
        }
    }
    let h = grid.step();
    let mut x = vec![0.0; nodes * d];
    let mut z = vec![0.0; nodes * d];
    for k in 1..nodes {
        for i in 0..d {
            x[k * d + i] = x[(k - 1) * d + i] + 0.5 * h * (y[(k - 1) * d + i] + y[k * d + i]);
            z[k * d + i] = z[(k - 1) * d + i] + noise[(k - 1) * d + i];
        }
    }
    Ok(SvePath { grid, dim: d, y, y_raw, x, z, increments: increments.to_vec() })
}

pub fn solve_sve<R: Rng + ?Sized>(spec: &LimitKernelSpec, a: &[f64], rng: &mut R) -> Result<SvePath> {
    let db = brownian_increments(rng, spec.grid().cells() * spec.dim(), spec.grid().step());
    solve_sve_with_noise(spec, a, &db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::{BernsteinTriplet, LevyMeasure};
    use crate::limits::{cir_correspondence, solve_cir_with_noise, FractionalNormalization};
    use rand::SeedableRng;

    #[test]
    fn zero_level_gives_zero_solution() {
        let g = Grid::new(1.0, 0.01).unwrap();
        let spec = LimitKernelSpec::fractional(0.75, FractionalNormalization::default(), &g).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = solve_sve(&spec, &[0.0], &mut rng).unwrap();
        assert!(p.y.iter().chain(&p.x).chain(&p.z).all(|v| *v == 0.0));
    }

    #[test]
    fn integrated_process_is_nondecreasing() {
        let g = Grid::new(1.0, 0.01).unwrap();
        let spec = LimitKernelSpec::fractional(0.6, FractionalNormalization::GammaAlpha, &g).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = solve_sve(&spec, &[0.3], &mut rng).unwrap();
            assert_eq!(p.x[0], 0.0);
            assert!(p.x.windows(2).all(|w| w[1] >= w[0]));
            assert!(p.y.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn exponential_kernel_tracks_cir_on_shared_noise() {
        let (m, lambda, a) = (1.0, 1.0, 1.0);
        let trip = BernsteinTriplet::new(m, lambda, LevyMeasure::None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cir = cir_correspondence(m, lambda, a).unwrap();
        let mut errs = Vec::new();
        for h in [0.02, 0.005] {
            let g = Grid::new(1.0, h).unwrap();
            let spec = LimitKernelSpec::from_triplet(&trip, &g).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..50 {
                let db = brownian_increments(&mut rng, g.cells(), h);
                let s = solve_sve_with_noise(&spec, &[a], &db).unwrap();
                let c = solve_cir_with_noise(&cir, &g, &db).unwrap();
                let e = (0..g.nodes()).map(|k| (s.y[k] - c.values[k]).abs()).fold(0.0, f64::max);
                worst = worst.max(e);
            }
            errs.push(worst);
        }
        assert!(errs[1] < errs[0], "{errs:?}");
        assert!(errs[1] < 0.1, "{errs:?}");
    }
}
