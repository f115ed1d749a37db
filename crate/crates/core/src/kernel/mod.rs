//! Self-exciting kernels, their integral transforms and the stability check.
//!
//! A [`Kernel`] is a nonnegative `d x d` matrix-valued function on `[0, ∞)`.
//! Three representations are supported:
//!
//! - `Exponential`: `φ_ij(t) = α_ij e^{-β_ij t}`;
//! - `PowerLawTail`: `φ_ij(t) = C_ij (δ + t)^{-1-a}`, a Lomax-type tail with
//!   `∫_T^∞ φ ~ (C/a) T^{-a}`;
//! - `GridSampled`: piecewise constant on cells `[k h, (k+1) h)`, zero beyond the
//!   last cell.
//!
//! Every form has a closed-form primitive, so cell integrals and compensators
//! are exact.

mod bernstein;
mod family;
mod spec;

pub use bernstein::{BernsteinTriplet, LevyMeasure};
pub use family::{BSchedule, NearlyUnstableFamily};
pub use spec::{KernelSpec, MatrixSpec};

use nalgebra::{Complex, DMatrix};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::special::power_tail_transform;

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm {
    Exponential { alpha: Matrix, beta: Matrix },
    PowerLawTail { scale: Matrix, exponent: f64, cutoff: f64 },
    GridSampled { step: f64, values: Vec<Matrix> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    dim: usize,
    form: KernelForm,
    /// `None` when some entry is not integrable on `[0, ∞)`.
    l1: Option<Matrix>,
}

/// Result of [`Kernel::l1_and_stability`].
#[derive(Debug, Clone, PartialEq)]
pub struct Stability {
    pub l1: Matrix,
    pub spectral_radius: f64,
    pub stable: bool,
}

fn check_square(m: &Matrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidParameter(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{what} entries must be finite and nonnegative"
        )));
    }
    Ok(m.nrows())
}

impl Kernel {
    pub fn exponential(alpha: Matrix, beta: Matrix) -> Result<Self> {
        let d = check_square(&alpha, "alpha")?;
        if check_square(&beta, "beta")? != d {
            return Err(Error::Dimension { expected: d, got: beta.nrows() });
        }
        let mut integrable = true;
        let l1 = Matrix::from_fn(d, d, |i, j| {
            let (a, b) = (alpha[(i, j)], beta[(i, j)]);
            if a == 0.0 {
                0.0
            } else if b > 0.0 {
                a / b
            } else {
                integrable = false;
                f64::INFINITY
            }
        });
        Ok(Self {
            dim: d,
            form: KernelForm::Exponential { alpha, beta },
            l1: integrable.then_some(l1),
        })
    }

    /// Univariate `α e^{-β t}`.
    pub fn exponential_scalar(alpha: f64, beta: f64) -> Result<Self> {
        Self::exponential(Matrix::from_element(1, 1, alpha), Matrix::from_element(1, 1, beta))
    }

    pub fn zero(dim: usize) -> Self {
        Self::exponential(Matrix::zeros(dim, dim), Matrix::from_element(dim, dim, 1.0))
            .expect("zero kernel is valid")
    }

    /// `φ_ij(t) = scale_ij (cutoff + t)^{-1-exponent}`.
    pub fn power_law(scale: Matrix, exponent: f64, cutoff: f64) -> Result<Self> {
        let d = check_square(&scale, "scale")?;
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(Error::Domain(format!(
                "power-law cutoff must be positive (kernel is not integrable at 0), got {cutoff}"
            )));
        }
        if !exponent.is_finite() || exponent <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "power-law exponent must exceed -1, got {exponent}"
            )));
        }
        let integrable = exponent > 0.0 || scale.iter().all(|c| *c == 0.0);
        let l1 = integrable.then(|| {
            scale.map(|c| if c == 0.0 { 0.0 } else { c * cutoff.powf(-exponent) / exponent })
        });
        Ok(Self {
            dim: d,
            form: KernelForm::PowerLawTail { scale, exponent, cutoff },
            l1,
        })
    }

    /// Univariate power-law kernel rescaled to have L¹ norm `norm`.
    pub fn power_law_normalized(norm: f64, exponent: f64, cutoff: f64) -> Result<Self> {
        if !(exponent > 0.0) {
            return Err(Error::Domain(format!(
                "normalized power law needs a positive exponent, got {exponent}"
            )));
        }
        let c = norm * exponent * cutoff.powf(exponent);
        Self::power_law(Matrix::from_element(1, 1, c), exponent, cutoff)
    }

    /// Piecewise-constant kernel with `values[k]` on `[k step, (k+1) step)`.
    pub fn grid(step: f64, values: Vec<Matrix>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Config(format!("grid step must be positive, got {step}")));
        }
        let first = values
            .first()
            .ok_or_else(|| Error::InvalidParameter("grid kernel needs at least one cell".into()))?;
        let d = check_square(first, "grid values")?;
        let mut l1 = Matrix::zeros(d, d);
        for v in &values {
            if check_square(v, "grid values")? != d {
                return Err(Error::Dimension { expected: d, got: v.nrows() });
            }
            l1 += v * step;
        }
        Ok(Self {
            dim: d,
            form: KernelForm::GridSampled { step, values },
            l1: Some(l1),
        })
    }

    /// Grid kernel whose cells carry the exact cell averages of `self`.
    pub fn discretize(&self, grid: &Grid) -> Result<Self> {
        let d = self.dim;
        let values = (0..grid.cells())
            .map(|k| {
                let (a, b) = (grid.node(k), grid.node(k + 1));
                Matrix::from_fn(d, d, |i, j| self.cell_integral_entry(i, j, a, b) / grid.step())
            })
            .collect();
        Self::grid(grid.step(), values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    /// Support end for grid kernels, `∞` otherwise.
    pub fn horizon(&self) -> f64 {
        match &self.form {
            KernelForm::GridSampled { step, values } => step * values.len() as f64,
            _ => f64::INFINITY,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.form {
            KernelForm::Exponential { alpha, .. } => alpha.iter().all(|a| *a == 0.0),
            KernelForm::PowerLawTail { scale, .. } => scale.iter().all(|a| *a == 0.0),
            KernelForm::GridSampled { values, .. } => {
                values.iter().all(|v| v.iter().all(|a| *a == 0.0))
            }
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.form, KernelForm::Exponential { .. })
    }

    /// `φ_ij(u)` for `u >= 0`; grid kernels vanish beyond their support.
    #[inline]
    pub fn entry(&self, i: usize, j: usize, u: f64) -> f64 {
        match &self.form {
            KernelForm::Exponential { alpha, beta } => {
                let a = alpha[(i, j)];
                if a == 0.0 {
                    0.0
                } else {
                    a * (-beta[(i, j)] * u).exp()
                }
            }
            KernelForm::PowerLawTail { scale, exponent, cutoff } => {
                scale[(i, j)] * (cutoff + u).powf(-1.0 - exponent)
            }
            KernelForm::GridSampled { step, values } => {
                let k = (u / step) as usize;
                values.get(k).map_or(0.0, |v| v[(i, j)])
            }
        }
    }

    /// `φ(t)`; for grid kernels the value of the enclosing cell.
    pub fn eval(&self, t: f64) -> Result<Matrix> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("kernel evaluated at negative time {t}")));
        }
        if let KernelForm::GridSampled { step, values } = &self.form {
            let horizon = self.horizon();
            if t > horizon {
                return Err(Error::OutOfRange { t, horizon });
            }
            let k = ((t / step) as usize).min(values.len() - 1);
            return Ok(values[k].clone());
        }
        Ok(Matrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j, t)))
    }

    /// `∫_0^u φ_ij(s) ds`.
    pub fn primitive_entry(&self, i: usize, j: usize, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match &self.form {
            KernelForm::Exponential { alpha, beta } => {
                let (a, b) = (alpha[(i, j)], beta[(i, j)]);
                if a == 0.0 {
                    0.0
                } else if b == 0.0 {
                    a * u
                } else {
                    -a / b * (-b * u).exp_m1()
                }
            }
            KernelForm::PowerLawTail { scale, exponent, cutoff } => {
                let c = scale[(i, j)];
                if c == 0.0 {
                    0.0
                } else if exponent.abs() < 1e-14 {
                    c * (u / cutoff).ln_1p()
                } else {
                    // (c/a) [δ^{-a} - (δ+u)^{-a}] = (c/a) δ^{-a} [1 - (1+u/δ)^{-a}]
                    -c / exponent * cutoff.powf(-exponent) * (-exponent * (u / cutoff).ln_1p()).exp_m1()
                }
            }
            KernelForm::GridSampled { step, values } => {
                let full = ((u / step) as usize).min(values.len());
                let mut acc: f64 = values[..full].iter().map(|v| v[(i, j)]).sum::<f64>() * step;
                if full < values.len() {
                    acc += values[full][(i, j)] * (u - full as f64 * step);
                }
                acc
            }
        }
    }

    /// `∫_a^b φ_ij(s) ds` for `0 <= a <= b`.
    pub fn cell_integral_entry(&self, i: usize, j: usize, a: f64, b: f64) -> f64 {
        match &self.form {
            KernelForm::Exponential { alpha, beta } => {
                let (al, be) = (alpha[(i, j)], beta[(i, j)]);
                if al == 0.0 {
                    0.0
                } else if be == 0.0 {
                    al * (b - a)
                } else {
                    -al / be * (-be * a).exp() * (-be * (b - a)).exp_m1()
                }
            }
            _ => (self.primitive_entry(i, j, b) - self.primitive_entry(i, j, a)).max(0.0),
        }
    }

    /// Exact cell averages on `grid`, flattened as `cells x d x d` (row-major per cell).
    pub fn cell_averages(&self, grid: &Grid) -> Vec<f64> {
        let d = self.dim;
        let h = grid.step();
        let mut out = Vec::with_capacity(grid.cells() * d * d);
        for k in 0..grid.cells() {
            let (a, b) = (grid.node(k), grid.node(k + 1));
            for i in 0..d {
                for j in 0..d {
                    out.push(self.cell_integral_entry(i, j, a, b) / h);
                }
            }
        }
        out
    }

    /// The L¹ matrix `‖φ‖_{L¹}`.
    pub fn l1(&self) -> Result<&Matrix> {
        self.l1.as_ref().ok_or_else(|| {
            Error::Domain("kernel is not integrable on [0, ∞) (check decay parameters)".into())
        })
    }

    /// L¹ matrix, its spectral radius and whether `ρ < 1`.
    pub fn l1_and_stability(&self) -> Result<Stability> {
        let l1 = self.l1()?.clone();
        let spectral_radius = spectral_radius_nonneg(&l1);
        Ok(Stability { stable: spectral_radius < 1.0, spectral_radius, l1 })
    }

    /// `∫_0^∞ t φ(t) dt`, entrywise.
    pub fn first_moment(&self) -> Result<Matrix> {
        let d = self.dim;
        match &self.form {
            KernelForm::Exponential { alpha, beta } => {
                self.l1()?;
                Ok(Matrix::from_fn(d, d, |i, j| {
                    let a = alpha[(i, j)];
                    if a == 0.0 { 0.0 } else { a / (beta[(i, j)] * beta[(i, j)]) }
                }))
            }
            KernelForm::PowerLawTail { scale, exponent, cutoff } => {
                if scale.iter().all(|c| *c == 0.0) {
                    return Ok(Matrix::zeros(d, d));
                }
                if *exponent <= 1.0 {
                    return Err(Error::Domain(format!(
                        "power-law kernel with exponent {exponent} <= 1 has infinite mean"
                    )));
                }
                let a = *exponent;
                Ok(scale.map(|c| c * cutoff.powf(1.0 - a) / (a * (a - 1.0))))
            }
            KernelForm::GridSampled { step, values } => {
                let mut m = Matrix::zeros(d, d);
                for (k, v) in values.iter().enumerate() {
                    m += v * (step * step * (k as f64 + 0.5));
                }
                Ok(m)
            }
        }
    }

    /// Laplace transform `∫_0^∞ e^{-z t} φ_ij(t) dt` for `Re z >= 0`.
    pub fn laplace_entry(&self, i: usize, j: usize, z: Complex<f64>) -> Complex<f64> {
        let zero = Complex::new(0.0, 0.0);
        match &self.form {
            KernelForm::Exponential { alpha, beta } => {
                let a = alpha[(i, j)];
                if a == 0.0 { zero } else { Complex::new(a, 0.0) / (z + beta[(i, j)]) }
            }
            KernelForm::PowerLawTail { scale, exponent, cutoff } => {
                let c = scale[(i, j)];
                if c == 0.0 {
                    zero
                } else {
                    power_tail_transform(*exponent, z * *cutoff) * (c * cutoff.powf(-exponent))
                }
            }
            KernelForm::GridSampled { step, values } => {
                // cell k contributes v_k e^{-z k h} (1 - e^{-z h}) / z
                let cell = cell_laplace_weight(z, *step);
                let decay = (-z * *step).exp();
                let mut shift = Complex::new(1.0, 0.0);
                let mut acc = zero;
                for v in values {
                    acc += shift * v[(i, j)];
                    shift *= decay;
                }
                acc * cell
            }
        }
    }

    /// Entrywise Laplace transform; at `z = 0` this is the L¹ matrix.
    pub fn laplace(&self, z: Complex<f64>) -> Result<CMatrix> {
        if z.re < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Domain(format!("Laplace transform needs Re z >= 0, got {z}")));
        }
        if self.l1.is_none() && z.re == 0.0 {
            return Err(Error::Domain("kernel is not integrable on [0, ∞)".into()));
        }
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| self.laplace_entry(i, j, z)))
    }

    /// Fourier transform `F_φ(ω) = L_φ(i ω)`.
    pub fn fourier(&self, omega: f64) -> Result<CMatrix> {
        self.laplace(Complex::new(0.0, omega))
    }

    /// Entrywise nonincreasing in `t` (required by the thinning majorant).
    pub fn is_nonincreasing(&self) -> bool {
        match &self.form {
            KernelForm::Exponential { .. } | KernelForm::PowerLawTail { .. } => true,
            KernelForm::GridSampled { values, .. } => values
                .windows(2)
                .all(|w| w[0].iter().zip(w[1].iter()).all(|(a, b)| b <= a)),
        }
    }

    /// `factor · φ`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!("scale factor {factor}")));
        }
        match &self.form {
            KernelForm::Exponential { alpha, beta } => {
                Self::exponential(alpha * factor, beta.clone())
            }
            KernelForm::PowerLawTail { scale, exponent, cutoff } => {
                Self::power_law(scale * factor, *exponent, *cutoff)
            }
            KernelForm::GridSampled { step, values } => {
                Self::grid(*step, values.iter().map(|v| v * factor).collect())
            }
        }
    }

    /// `t ↦ amplitude · rate · φ(rate · t)`; preserves the form.
    pub fn time_scaled(&self, amplitude: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !(amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time scaling needs rate > 0 and amplitude >= 0, got ({amplitude}, {rate})"
            )));
        }
        match &self.form {
            KernelForm::Exponential { alpha, beta } => {
                Self::exponential(alpha * (amplitude * rate), beta * rate)
            }
            KernelForm::PowerLawTail { scale, exponent, cutoff } => Self::power_law(
                scale * (amplitude * rate.powf(-exponent)),
                *exponent,
                cutoff / rate,
            ),
            KernelForm::GridSampled { step, values } => Self::grid(
                step / rate,
                values.iter().map(|v| v * (amplitude * rate)).collect(),
            ),
        }
    }

    /// Draws a delay from the density `φ_ij / ‖φ_ij‖_{L¹}`.
    pub fn sample_delay<R: Rng + ?Sized>(&self, i: usize, j: usize, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        match &self.form {
            KernelForm::Exponential { beta, .. } => -u.ln() / beta[(i, j)],
            KernelForm::PowerLawTail { exponent, cutoff, .. } => {
                // survival (δ/(δ+s))^a
                cutoff * ((-u.ln() / exponent).exp_m1())
            }
            KernelForm::GridSampled { step, values } => {
                let total: f64 = values.iter().map(|v| v[(i, j)]).sum();
                let mut target = (1.0 - u) * total;
                for (k, v) in values.iter().enumerate() {
                    let w = v[(i, j)];
                    if target < w {
                        return (k as f64 + target / w) * step;
                    }
                    target -= w;
                }
                // rounding spill-over: last nonempty cell end
                let last = values.iter().rposition(|v| v[(i, j)] > 0.0).unwrap_or(0);
                (last as f64 + 1.0) * step
            }
        }
    }
}

/// `(1 - e^{-z h}) / z`, the Laplace weight of a unit cell of width `h`.
pub(crate) fn cell_laplace_weight(z: Complex<f64>, h: f64) -> Complex<f64> {
    let zh = z * h;
    if zh.norm() < 1e-6 {
        // series: h (1 - zh/2 + (zh)^2/6)
        (Complex::new(1.0, 0.0) - zh / 2.0 + zh * zh / 6.0) * h
    } else {
        -(-zh).exp_m1() / z
    }
}

trait ExpM1 {
    fn exp_m1(self) -> Self;
}

impl ExpM1 for Complex<f64> {
    fn exp_m1(self) -> Self {
        if self.norm() < 1e-5 {
            self + self * self / 2.0 + self * self * self / 6.0
        } else {
            self.exp() - 1.0
        }
    }
}

/// Spectral radius of a nonnegative square matrix by power iteration.
///
/// Iterates on `A + I`, whose Perron root is `ρ(A) + 1` and which has no other
/// eigenvalue of the same modulus, so periodic matrices converge too. Stops after
/// 200 iterations or when the estimate changes by less than `1e-12` relatively.
pub fn spectral_radius_nonneg(a: &Matrix) -> f64 {
    let d = a.nrows();
    if a.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let shifted = a + Matrix::identity(d, d);
    let mut x = nalgebra::DVector::from_element(d, 1.0 / d as f64);
    let mut estimate = 0.0;
    for _ in 0..200 {
        let y = &shifted * &x;
        let norm = y.iter().sum::<f64>();
        let next = norm / x.iter().sum::<f64>();
        x = y / norm;
        if (next - estimate).abs() <= 1e-12 * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    (estimate - 1.0).max(0.0)
}

/// Spectral radius of a complex matrix from its Schur form.
pub fn spectral_radius_complex(a: &CMatrix) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].norm();
    }
    a.clone()
        .schur()
        .eigenvalues()
        .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// `(ρ(F_φ(ω)), ρ(‖φ‖_{L¹}))`: the Fourier transform's spectral radius is bounded by
/// that of the L¹ matrix (the bound the stability argument relies on).
pub fn fourier_spectral_bound(kernel: &Kernel, omega: f64) -> Result<(f64, f64)> {
    let f = kernel.fourier(omega)?;
    let rho_l1 = spectral_radius_nonneg(kernel.l1()?);
    Ok((spectral_radius_complex(&f), rho_l1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    // midpoint-rule oracle for ∫_0^upper g
    fn quad(g: impl Fn(f64) -> f64, upper: f64, n: usize) -> f64 {
        let h = upper / n as f64;
        (0..n).map(|k| g((k as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn eval_examples() {
        let k = Kernel::exponential_scalar(1.0, 2.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap()[(0, 0)], 1.0);
        assert_relative_eq!(k.eval(0.5).unwrap()[(0, 0)], (-1.0f64).exp(), epsilon = 1e-15);
        let z = Kernel::zero(2);
        assert_eq!(z.eval(3.7).unwrap(), Matrix::zeros(2, 2));
        assert!(matches!(k.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_eval_range() {
        let k = Kernel::grid(0.5, vec![dmatrix![2.0], dmatrix![1.0]]).unwrap();
        assert_eq!(k.eval(0.25).unwrap()[(0, 0)], 2.0);
        assert_eq!(k.eval(0.75).unwrap()[(0, 0)], 1.0);
        assert_eq!(k.eval(1.0).unwrap()[(0, 0)], 1.0);
        assert!(matches!(k.eval(1.01), Err(Error::OutOfRange { .. })));
        assert_relative_eq!(k.l1().unwrap()[(0, 0)], 1.5);
    }

    #[test]
    fn l1_examples() {
        let k = Kernel::exponential_scalar(1.0, 2.0).unwrap();
        let s = k.l1_and_stability().unwrap();
        let oracle = quad(|t| (-2.0 * t).exp(), 40.0, 400_000);
        assert_relative_eq!(s.l1[(0, 0)], oracle, epsilon = 1e-9);
        assert_relative_eq!(s.spectral_radius, 0.5, epsilon = 1e-12);
        assert!(s.stable);

        let z = Kernel::zero(3).l1_and_stability().unwrap();
        assert_eq!(z.spectral_radius, 0.0);
        assert!(z.stable);

        let two = Kernel::exponential(dmatrix![0.3, 0.2; 0.2, 0.3], Matrix::from_element(2, 2, 1.0))
            .unwrap();
        let s = two.l1_and_stability().unwrap();
        let eig = s.l1.clone().symmetric_eigen().eigenvalues;
        let oracle = eig.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(oracle, 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.spectral_radius, oracle, epsilon = 1e-10);
    }

    #[test]
    fn power_iteration_handles_periodic_matrices() {
        let a = dmatrix![0.0, 2.0; 0.5, 0.0];
        assert_relative_eq!(spectral_radius_nonneg(&a), 1.0, epsilon = 1e-9);
        // nilpotent: the shifted iteration converges only like 1/k
        let b = dmatrix![0.0, 0.0; 0.7, 0.0];
        assert!(spectral_radius_nonneg(&b) < 1e-2);
    }

    #[test]
    fn non_integrable_kernels_are_rejected() {
        let k = Kernel::exponential_scalar(1.0, 0.0).unwrap();
        assert!(matches!(k.l1_and_stability(), Err(Error::Domain(_))));
        let p = Kernel::power_law(dmatrix![1.0], -0.5, 1.0).unwrap();
        assert!(matches!(p.l1_and_stability(), Err(Error::Domain(_))));
        assert!(matches!(
            Kernel::power_law(dmatrix![1.0], 0.7, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn laplace_examples() {
        let k = Kernel::exponential_scalar(1.0, 2.0).unwrap();
        assert_relative_eq!(k.laplace(c(0.0)).unwrap()[(0, 0)].re, 0.5);
        let (alpha, beta) = (1.3, 0.7);
        let k2 = Kernel::exponential_scalar(alpha, beta).unwrap();
        assert_relative_eq!(k2.laplace(c(beta)).unwrap()[(0, 0)].re, alpha / (2.0 * beta));
        let z = Kernel::zero(1);
        assert_eq!(z.laplace(c(3.0)).unwrap()[(0, 0)], c(0.0));
        assert!(matches!(k.laplace(c(-0.1)), Err(Error::Domain(_))));
    }

    #[test]
    fn power_law_transforms_match_quadrature() {
        let k = Kernel::power_law_normalized(0.8, 0.75, 0.5).unwrap();
        assert_relative_eq!(k.l1().unwrap()[(0, 0)], 0.8, epsilon = 1e-14);
        assert_relative_eq!(k.laplace(c(0.0)).unwrap()[(0, 0)].re, 0.8, epsilon = 1e-12);
        // substitution v = (δ/(δ+t))^a maps the tail onto (0, 1]
        let a: f64 = 0.75;
        let delta = 0.5;
        for &z in &[0.3, 2.0, 9.0] {
            let oracle = 0.8 * quad(|v| (-z * delta * (v.powf(-1.0 / a) - 1.0)).exp(), 1.0, 200_000);
            let got = k.laplace(c(z)).unwrap()[(0, 0)];
            assert_relative_eq!(got.re, oracle, epsilon = 1e-6);
        }
        let prim = k.primitive_entry(0, 0, 3.0);
        let oracle = quad(|t| k.entry(0, 0, t), 3.0, 300_000);
        assert_relative_eq!(prim, oracle, epsilon = 1e-8);
    }

    #[test]
    fn grid_laplace_is_exact_cellwise() {
        let k = Kernel::grid(0.25, vec![dmatrix![1.0], dmatrix![0.5], dmatrix![0.25]]).unwrap();
        let z = 1.7;
        let oracle: f64 = [1.0, 0.5, 0.25]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (a, b) = (i as f64 * 0.25, (i + 1) as f64 * 0.25);
                v * ((-z * a).exp() - (-z * b).exp()) / z
            })
            .sum();
        assert_relative_eq!(k.laplace(c(z)).unwrap()[(0, 0)].re, oracle, epsilon = 1e-14);
        assert_relative_eq!(k.laplace(c(0.0)).unwrap()[(0, 0)].re, k.l1().unwrap()[(0, 0)]);
    }

    #[test]
    fn discretized_kernel_keeps_mass() {
        let k = Kernel::exponential_scalar(1.0, 2.0).unwrap();
        let g = Grid::new(20.0, 0.01).unwrap();
        let d = k.discretize(&g).unwrap();
        assert_relative_eq!(d.l1().unwrap()[(0, 0)], 0.5 * (1.0 - (-40.0f64).exp()), epsilon = 1e-12);
        assert!(d.is_nonincreasing());
        let bumpy = Kernel::grid(1.0, vec![dmatrix![0.1], dmatrix![0.2]]).unwrap();
        assert!(!bumpy.is_nonincreasing());
    }

    #[test]
    fn time_scaling_preserves_form_and_mass() {
        let base = Kernel::exponential_scalar(1.0, 1.0).unwrap();
        let k = base.time_scaled(0.9, 10.0).unwrap();
        assert_relative_eq!(k.entry(0, 0, 0.3), 0.9 * 10.0 * (-3.0f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(k.l1().unwrap()[(0, 0)], 0.9, epsilon = 1e-14);

        let p = Kernel::power_law_normalized(1.0, 0.7, 1.0).unwrap();
        let ps = p.time_scaled(0.5, 4.0).unwrap();
        assert_relative_eq!(ps.entry(0, 0, 0.2), 0.5 * 4.0 * p.entry(0, 0, 0.8), epsilon = 1e-13);
        assert_relative_eq!(ps.l1().unwrap()[(0, 0)], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn fourier_radius_is_bounded_by_l1_radius() {
        let k = Kernel::exponential(
            dmatrix![0.3, 0.4; 0.1, 0.2],
            dmatrix![1.0, 2.0; 0.5, 3.0],
        )
        .unwrap();
        for &w in &[0.0, 0.5, 3.0, 40.0] {
            let (rf, rl) = fourier_spectral_bound(&k, w).unwrap();
            assert!(rf <= rl * (1.0 + 1e-9), "ω={w}: {rf} > {rl}");
        }
    }

    #[test]
    fn delay_sampler_means() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let k = Kernel::grid(0.5, vec![dmatrix![2.0], dmatrix![1.0]]).unwrap();
        let n = 200_000;
        let mean = (0..n).map(|_| k.sample_delay(0, 0, &mut rng)).sum::<f64>() / n as f64;
        let want = k.first_moment().unwrap()[(0, 0)] / k.l1().unwrap()[(0, 0)];
        assert!((mean - want).abs() < 0.005, "{mean} vs {want}");
        let p = Kernel::power_law_normalized(1.0, 2.5, 1.0).unwrap();
        let mean = (0..n).map(|_| p.sample_delay(0, 0, &mut rng)).sum::<f64>() / n as f64;
        let want = p.first_moment().unwrap()[(0, 0)];
        assert!((mean - want).abs() < 0.02, "{mean} vs {want}");
    }
}
