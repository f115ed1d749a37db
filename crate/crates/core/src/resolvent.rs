//! Resolvent of the second kind `ψ = Σ_{k≥1} φ^{*k}` on a uniform grid and the
//! scaled measures `Fⁿ(dt) = β_n ψⁿ(t) dt`.
//!
//! Cell values solve `ψ_k = φ̄_k + h Σ_{j<k} φ̄_{k-1-j} ψ_j` by forward substitution,
//! where `φ̄_k` is the exact average of `φ` over cell `k`. Cell values approximate
//! `ψ` at cell midpoints.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{cell_laplace_weight, CMatrix, Kernel, Matrix, NearlyUnstableFamily};

/// `Fⁿ = β_n ψⁿ` data attached by [`scaled_resolvent_measure`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMeasure {
    pub n: u64,
    pub beta_n: f64,
    pub a_n: f64,
    /// `fⁿ = β_n ψⁿ` per cell, `cells x d x d`.
    pub density: Vec<f64>,
    /// `Fⁿ(t_k)` per node, `nodes x d x d`.
    pub cumulative: Vec<f64>,
    /// Largest entry of `β_n ‖ψⁿ‖_{L²_T}`.
    pub l2_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventTable {
    grid: Grid,
    dim: usize,
    psi: Vec<f64>,
    cumnorm: Vec<f64>,
    pub scaled: Option<ScaledMeasure>,
    pub warnings: Vec<String>,
}

impl ResolventTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ψ` on cell `k`, flattened row-major.
    pub fn psi_cell(&self, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.psi[k * dd..(k + 1) * dd]
    }

    pub fn psi_entry(&self, k: usize, i: usize, j: usize) -> f64 {
        self.psi[(k * self.dim + i) * self.dim + j]
    }

    pub fn psi_matrix(&self, k: usize) -> Matrix {
        DMatrix::from_row_slice(self.dim, self.dim, self.psi_cell(k))
    }

    /// `∫_0^{t_k} ψ_ij`.
    pub fn cumnorm_entry(&self, k: usize, i: usize, j: usize) -> f64 {
        self.cumnorm[(k * self.dim + i) * self.dim + j]
    }

    /// `∫_0^t ψ` for any `t` in `[0, end]`, linear within cells (exact for the
    /// piecewise-constant `ψ`).
    pub fn cumnorm_at(&self, t: f64) -> Result<Matrix> {
        let end = self.grid.end();
        if !(t >= 0.0) || t > end * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { t, horizon: end });
        }
        let h = self.grid.step();
        let k = ((t / h) as usize).min(self.grid.cells() - 1);
        let frac = t - self.grid.node(k);
        let d = self.dim;
        Ok(Matrix::from_fn(d, d, |i, j| {
            self.cumnorm_entry(k, i, j) + frac * self.psi_entry(k, i, j)
        }))
    }

    /// `∫_0^{T} e^{-z t} ψ(t) dt` integrating the cell values exactly.
    pub fn laplace(&self, z: Complex<f64>) -> CMatrix {
        let d = self.dim;
        let h = self.grid.step();
        let decay = (-z * h).exp();
        let mut shift = Complex::new(1.0, 0.0);
        let mut acc = vec![Complex::new(0.0, 0.0); d * d];
        for k in 0..self.grid.cells() {
            for (a, v) in acc.iter_mut().zip(self.psi_cell(k)) {
                *a += shift * *v;
            }
            shift *= decay;
        }
        let w = cell_laplace_weight(z, h);
        CMatrix::from_row_slice(d, d, &acc).map(|v| v * w)
    }

    /// Largest absolute residual of the discrete resolvent equation.
    pub fn discrete_residual(&self, kernel: &Kernel) -> f64 {
        let phi = kernel.cell_averages(&self.grid);
        let d = self.dim;
        let dd = d * d;
        let h = self.grid.step();
        let mut worst: f64 = 0.0;
        for k in 0..self.grid.cells() {
            let mut rhs = phi[k * dd..(k + 1) * dd].to_vec();
            for j in 0..k {
                let p = &phi[(k - 1 - j) * dd..(k - j) * dd];
                let s = self.psi_cell(j);
                mat_mul_acc(&mut rhs, p, s, d, h);
            }
            for (r, v) in rhs.iter().zip(self.psi_cell(k)) {
                worst = worst.max((r - v).abs());
            }
        }
        worst
    }

    /// CSV columns `t, psi_ij.., cumnorm_ij.., [fn_ij.., Fn_ij..]` per node.
    ///
    /// Cell values are reported at the left node of their cell; the last node
    /// repeats the last cell.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let d = self.dim;
        let mut header = vec!["t".to_string()];
        let names = |prefix: &str| -> Vec<String> {
            (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| format!("{prefix}_{i}{j}")).collect()
        };
        header.extend(names("psi"));
        header.extend(names("cumnorm"));
        if self.scaled.is_some() {
            header.extend(names("fn"));
            header.extend(names("Fn"));
        }
        let dd = d * d;
        let rows = (0..self.grid.nodes())
            .map(|k| {
                let cell = k.min(self.grid.cells() - 1);
                let mut row = vec![self.grid.node(k)];
                row.extend_from_slice(self.psi_cell(cell));
                row.extend_from_slice(&self.cumnorm[k * dd..(k + 1) * dd]);
                if let Some(s) = &self.scaled {
                    row.extend_from_slice(&s.density[cell * dd..(cell + 1) * dd]);
                    row.extend_from_slice(&s.cumulative[k * dd..(k + 1) * dd]);
                }
                row
            })
            .collect();
        (header, rows)
    }
}

/// `acc += h · a · b` for row-major `d x d` slices.
#[inline]
fn mat_mul_acc(acc: &mut [f64], a: &[f64], b: &[f64], d: usize, h: f64) {
    if d == 1 {
        acc[0] += h * a[0] * b[0];
        return;
    }
    for i in 0..d {
        for l in 0..d {
            let ail = h * a[i * d + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..d {
                acc[i * d + j] += ail * b[l * d + j];
            }
        }
    }
}

/// Solves the discretized resolvent equation on `grid`.
pub fn resolvent_grid(kernel: &Kernel, grid: &Grid) -> Result<ResolventTable> {
    let mut warnings = Vec::new();
    match kernel.l1_and_stability() {
        Ok(s) if !s.stable => warnings.push(format!(
            "spectral radius {} >= 1: resolvent norms grow with the horizon",
            s.spectral_radius
        )),
        Err(_) => warnings.push("kernel is not integrable on [0, ∞)".into()),
        _ => {}
    }
    let d = kernel.dim();
    let dd = d * d;
    let m = grid.cells();
    let h = grid.step();
    let phi = kernel.cell_averages(grid);
    let mut psi = vec![0.0; m * dd];
    if !kernel.is_zero() {
        for k in 0..m {
            let mut cur = phi[k * dd..(k + 1) * dd].to_vec();
            if d == 1 {
                // hot path: plain dot product
                let mut s = 0.0;
                for j in 0..k {
                    s += phi[k - 1 - j] * psi[j];
                }
                cur[0] += h * s;
            } else {
                for j in 0..k {
                    let (p, q) = (&phi[(k - 1 - j) * dd..(k - j) * dd], &psi[j * dd..(j + 1) * dd]);
                    mat_mul_acc(&mut cur, p, q, d, h);
                }
            }
            psi[k * dd..(k + 1) * dd].copy_from_slice(&cur);
        }
    }
    let mut cumnorm = vec![0.0; (m + 1) * dd];
    for k in 0..m {
        for e in 0..dd {
            cumnorm[(k + 1) * dd + e] = cumnorm[k * dd + e] + h * psi[k * dd + e];
        }
    }
    Ok(ResolventTable { grid: *grid, dim: d, psi, cumnorm, scaled: None, warnings })
}

/// Resolvent of the `n`-th family member with `Fⁿ = β_n ψⁿ` attached.
pub fn scaled_resolvent_measure(
    family: &NearlyUnstableFamily,
    n: u64,
    grid: &Grid,
) -> Result<ResolventTable> {
    let member = family.member(n)?;
    let mut table = resolvent_grid(&member.kernel, grid)?;
    let beta = member.beta_n;
    let density: Vec<f64> = table.psi.iter().map(|v| beta * v).collect();
    let cumulative: Vec<f64> = table.cumnorm.iter().map(|v| beta * v).collect();
    let dd = table.dim * table.dim;
    let h = grid.step();
    let l2_bound = (0..dd)
        .map(|e| {
            let sq: f64 = (0..grid.cells()).map(|k| table.psi[k * dd + e].powi(2)).sum();
            beta * (h * sq).sqrt()
        })
        .fold(0.0, f64::max);
    table.scaled = Some(ScaledMeasure { n, beta_n: beta, a_n: member.a_n, density, cumulative, l2_bound });
    Ok(table)
}

/// Residual of the Laplace identity `L_ψ = L_φ (I - L_φ)^{-1}` at one `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceResidual {
    pub z: f64,
    /// Largest entrywise modulus; `None` when `I - L_φ(z)` is singular.
    pub residual: Option<f64>,
    pub singular: bool,
}

pub fn verify_laplace_identity(kernel: &Kernel, table: &ResolventTable, zs: &[f64]) -> Result<Vec<LaplaceResidual>> {
    if kernel.dim() != table.dim {
        return Err(Error::Dimension { expected: table.dim, got: kernel.dim() });
    }
    let d = kernel.dim();
    zs.iter()
        .map(|&z| {
            if !(z > 0.0) {
                return Err(Error::Domain(format!("Laplace identity needs z > 0, got {z}")));
            }
            let zc = Complex::new(z, 0.0);
            let lphi = kernel.laplace(zc)?;
            let gap = CMatrix::identity(d, d) - &lphi;
            let Some(inv) = gap.try_inverse().filter(|m| m.iter().all(|v| v.re.is_finite() && v.im.is_finite())) else {
                return Ok(LaplaceResidual { z, residual: None, singular: true });
            };
            let rhs = lphi * inv;
            let lhs = table.laplace(zc);
            let r = (lhs - rhs).iter().map(|v| v.norm()).fold(0.0, f64::max);
            Ok(LaplaceResidual { z, residual: Some(r), singular: false })
        })
        .collect()
}

/// One entry of [`fourier_limit_setting1`].
#[derive(Debug, Clone, PartialEq)]
pub struct SettingOneTerm {
    pub beta_n: f64,
    /// `F_{Fⁿ}(z)`, `None` when `I - F_{φⁿ}(z)` is singular.
    pub transform: Option<CMatrix>,
    /// Column-sum operator norm of `F_{Fⁿ}(z) - B(z)^{-1}`.
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingOneReport {
    pub limit: CMatrix,
    pub terms: Vec<SettingOneTerm>,
}

impl SettingOneReport {
    /// Deviations decrease strictly along the supplied sequence.
    pub fn deviations_decrease(&self) -> bool {
        let devs: Vec<Option<f64>> = self.terms.iter().map(|t| t.deviation).collect();
        devs.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a))
    }
}

pub(crate) fn operator_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Families with `F_{φⁿ}(z) = I - β_n B(z)`: evaluates
/// `F_{Fⁿ}(z) = β_n (I - F_{φⁿ}(z))^{-1} F_{φⁿ}(z)` for each `β_n` and compares
/// with the limit `B(z)^{-1}`.
pub fn fourier_limit_setting1(b_at_z: &CMatrix, betas: &[f64]) -> Result<SettingOneReport> {
    let d = b_at_z.nrows();
    if b_at_z.ncols() != d {
        return Err(Error::Dimension { expected: d, got: b_at_z.ncols() });
    }
    let limit = b_at_z
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("B(z) is not invertible".into()))?;
    let eye = CMatrix::identity(d, d);
    let terms = betas
        .iter()
        .map(|&beta| {
            let f_phi = &eye - b_at_z * Complex::new(beta, 0.0);
            let transform = (&eye - &f_phi)
                .try_inverse()
                .map(|inv| inv * &f_phi * Complex::new(beta, 0.0));
            let deviation = transform.as_ref().map(|t| operator_norm(&(t - &limit)));
            SettingOneTerm { beta_n: beta, transform, deviation }
        })
        .collect();
    Ok(SettingOneReport { limit, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BSchedule;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DVector};

    #[test]
    fn exponential_matches_closed_form() {
        let k = Kernel::exponential_scalar(1.0, 2.0).unwrap();
        let g = Grid::new(5.0, 1e-3).unwrap();
        let t = resolvent_grid(&k, &g).unwrap();
        let err = (0..g.cells())
            .map(|c| (t.psi_entry(c, 0, 0) - (-g.midpoint(c)).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "max error {err}");
        assert!(t.discrete_residual(&k) <= 1e-12);
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let g = Grid::new(1.0, 0.01).unwrap();
        let t = resolvent_grid(&Kernel::zero(2), &g).unwrap();
        assert!(t.psi.iter().all(|v| *v == 0.0));
        let r = verify_laplace_identity(&Kernel::zero(2), &t, &[0.5, 3.0]).unwrap();
        assert!(r.iter().all(|x| x.residual == Some(0.0)));
    }

    #[test]
    fn laplace_residuals() {
        let k = Kernel::exponential_scalar(1.0, 2.0).unwrap();
        let g = Grid::new(5.0, 1e-3).unwrap();
        let t = resolvent_grid(&k, &g).unwrap();
        let r = verify_laplace_identity(&k, &t, &[0.5, 1.0, 2.0, 1e4]).unwrap();
        for x in &r[..3] {
            assert!(x.residual.unwrap() <= 1e-3, "{x:?}");
        }
        assert!(r[3].residual.unwrap() <= 1e-6, "{:?}", r[3]);
        assert!(verify_laplace_identity(&k, &t, &[0.0]).is_err());
    }

    #[test]
    fn singular_identity_is_flagged() {
        // L_φ(z) = 1 at z = 1 for α = 2, β = 1
        let k = Kernel::exponential_scalar(2.0, 1.0).unwrap();
        let g = Grid::new(1.0, 0.01).unwrap();
        let t = resolvent_grid(&k, &g).unwrap();
        assert!(!t.warnings.is_empty());
        let r = verify_laplace_identity(&k, &t, &[1.0]).unwrap();
        assert!(r[0].singular && r[0].residual.is_none());
    }

    #[test]
    fn jr_scaled_mass_matches_geometric_series() {
        let fam = NearlyUnstableFamily::jr(
            Kernel::exponential_scalar(1.0, 1.0).unwrap(),
            1.0,
            BSchedule::default(),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        // ψⁿ(t) = a_n b_n e^{-c t}, so β_n‖ψⁿ‖_{L¹_T} = a_n (1 - e^{-cT}) with a long T
        let g = Grid::new(30.0, 2e-3).unwrap();
        for n in [5u64, 20] {
            let t = scaled_resolvent_measure(&fam, n, &g).unwrap();
            let s = t.scaled.as_ref().unwrap();
            let total = *s.cumulative.last().unwrap();
            let want = s.a_n * (1.0 - (-30.0f64).exp());
            assert!((total - want).abs() < 2e-2 * want, "n={n}: {total} vs {want}");
            // Fⁿ(t) → 1 - e^{-t}
            let f1 = t.cumnorm_at(1.0).unwrap()[(0, 0)] * s.beta_n;
            assert!((f1 - (1.0 - (-1.0f64).exp())).abs() < 1.1 * s.beta_n);
        }
    }

    #[test]
    fn setting_one_examples() {
        let b = dmatrix![Complex::new(2.0, 0.0), Complex::new(0.0, 0.0); Complex::new(0.0, 0.0), Complex::new(3.0, 0.0)];
        let r = fourier_limit_setting1(&b, &[0.1, 0.01, 0.001]).unwrap();
        assert_relative_eq!(r.limit[(0, 0)].re, 0.5);
        assert_relative_eq!(r.limit[(1, 1)].re, 1.0 / 3.0);
        assert!(r.deviations_decrease());
        let devs: Vec<f64> = r.terms.iter().map(|t| t.deviation.unwrap()).collect();
        for (t, dev) in r.terms.iter().zip(&devs) {
            assert_relative_eq!(dev / t.beta_n, 1.0, epsilon = 1e-8);
        }
        let scalar = dmatrix![Complex::new(1.7, 0.0)];
        let r = fourier_limit_setting1(&scalar, &[0.5]).unwrap();
        assert_relative_eq!(r.limit[(0, 0)].re, 1.0 / 1.7);
    }
}
