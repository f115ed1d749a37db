//! Bernstein functions `Φ(z) = b + c z + ∫(1 - e^{-zx}) ν(dx)`.
//!
//! In the nearly unstable limit, `1/Φ` is the Laplace transform of the limit
//! measure `F`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LevyMeasure {
    None,
    /// Density `scale · x^{-1-alpha}` on `(0, ∞)`, `alpha ∈ (0, 1)`.
    Stable { scale: f64, alpha: f64 },
    /// Atoms `(x_k, w_k)` plus the `∫(1 ∧ x) ν` mass dropped by truncation.
    Discrete { atoms: Vec<(f64, f64)>, truncation_error: f64 },
}

impl LevyMeasure {
    /// Stable measure whose contribution to `Φ` is exactly `lambda · z^alpha`.
    pub fn stable_with_symbol(lambda: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stable measure needs alpha in (0,1) and lambda >= 0, got ({alpha}, {lambda})"
            )));
        }
        Ok(LevyMeasure::Stable { scale: lambda * alpha / gamma(1.0 - alpha), alpha })
    }

    /// Log-spaced discretization of a stable density on `[x_min, x_max]`.
    ///
    /// Each atom sits at the geometric midpoint of its cell and carries the exact
    /// cell mass.
    pub fn discretize_stable(scale: f64, alpha: f64, x_min: f64, x_max: f64, atoms: usize) -> Result<Self> {
        if !(0.0 < x_min && x_min < x_max) || atoms == 0 || !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bad discretization x_min={x_min}, x_max={x_max}, atoms={atoms}, alpha={alpha}"
            )));
        }
        let ratio = (x_max / x_min).ln() / atoms as f64;
        let tail = |x: f64| scale * x.powf(-alpha) / alpha; // ν((x, ∞))
        let atoms_vec = (0..atoms)
            .map(|k| {
                let lo = x_min * (ratio * k as f64).exp();
                let hi = x_min * (ratio * (k + 1) as f64).exp();
                ((lo * hi).sqrt(), tail(lo) - tail(hi))
            })
            .collect();
        // ∫_0^{x_min} x ν(dx) + ν((x_max, ∞)), with x_max ≥ 1 assumed for the second piece
        let below = scale * x_min.powf(1.0 - alpha) / (1.0 - alpha);
        let above = if x_max >= 1.0 {
            tail(x_max)
        } else {
            scale * (1.0 - x_max.powf(1.0 - alpha)) / (1.0 - alpha) + tail(1.0)
        };
        Ok(LevyMeasure::Discrete { atoms: atoms_vec, truncation_error: below + above })
    }

    /// `∫(1 ∧ x) ν(dx)`.
    pub fn small_jump_mass(&self) -> f64 {
        match self {
            LevyMeasure::None => 0.0,
            LevyMeasure::Stable { scale, alpha } => {
                scale / (1.0 - alpha) + scale / alpha
            }
            LevyMeasure::Discrete { atoms, .. } => atoms.iter().map(|(x, w)| x.min(1.0) * w).sum(),
        }
    }

    /// `∫(1 - e^{-zx}) ν(dx)`.
    pub fn integral(&self, z: f64) -> f64 {
        match self {
            LevyMeasure::None => 0.0,
            LevyMeasure::Stable { scale, alpha } => {
                scale * gamma(1.0 - alpha) / alpha * z.powf(*alpha)
            }
            LevyMeasure::Discrete { atoms, .. } => {
                atoms.iter().map(|(x, w)| -w * (-z * x).exp_m1()).sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinTriplet {
    drift: f64,
    linear: f64,
    levy: LevyMeasure,
}

impl BernsteinTriplet {
    pub fn new(drift: f64, linear: f64, levy: LevyMeasure) -> Result<Self> {
        if !(drift >= 0.0) || !(linear >= 0.0) || !drift.is_finite() || !linear.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "drift and linear coefficient must be finite and nonnegative, got ({drift}, {linear})"
            )));
        }
        match &levy {
            LevyMeasure::Stable { scale, alpha } => {
                if !(*scale >= 0.0) || !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "stable Lévy density needs scale >= 0 and alpha in (0,1), got ({scale}, {alpha})"
                    )));
                }
            }
            LevyMeasure::Discrete { atoms, .. } => {
                if atoms.iter().any(|(x, w)| !(*x > 0.0) || !(*w >= 0.0)) {
                    return Err(Error::InvalidParameter(
                        "Lévy atoms need positive locations and nonnegative weights".into(),
                    ));
                }
                if !levy.small_jump_mass().is_finite() {
                    return Err(Error::InvalidParameter("∫(1 ∧ x) ν(dx) is not finite".into()));
                }
            }
            LevyMeasure::None => {}
        }
        Ok(Self { drift, linear, levy })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn linear(&self) -> f64 {
        self.linear
    }

    pub fn levy(&self) -> &LevyMeasure {
        &self.levy
    }

    /// `Φ(z)` for `z >= 0`.
    pub fn phi(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::Domain(format!("Bernstein function needs z >= 0, got {z}")));
        }
        Ok(self.drift + self.linear * z + self.levy.integral(z))
    }

    /// `(Φ(z), 1/Φ(z))`; the reciprocal is `None` when `Φ(z) = 0`.
    pub fn eval(&self, z: f64) -> Result<(f64, Option<f64>)> {
        let phi = self.phi(z)?;
        Ok((phi, (phi > 0.0).then(|| 1.0 / phi)))
    }

    /// Laplace transform `1/Φ(z)` of the limit measure.
    pub fn limit_laplace(&self, z: f64) -> Result<f64> {
        match self.eval(z)? {
            (_, Some(v)) => Ok(v),
            (phi, None) => Err(Error::Domain(format!("Φ({z}) = {phi}, cannot invert"))),
        }
    }

    /// `(m, λ, α)` when `Φ(z) = m + λ z^α` in closed form (`α = 1` for the linear case).
    pub fn closed_form(&self) -> Option<(f64, f64, f64)> {
        match &self.levy {
            LevyMeasure::None => Some((self.drift, self.linear, 1.0)),
            LevyMeasure::Stable { scale, alpha } if self.linear == 0.0 => {
                Some((self.drift, scale * gamma(1.0 - alpha) / alpha, *alpha))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn light_tail_example() {
        let (m, lam) = (0.7, 1.9);
        let t = BernsteinTriplet::new(m, lam, LevyMeasure::None).unwrap();
        for &z in &[0.0, 0.5, 3.0] {
            let (phi, inv) = t.eval(z).unwrap();
            assert_relative_eq!(phi, m + lam * z);
            assert_relative_eq!(inv.unwrap(), 1.0 / (m + lam * z));
        }
    }

    #[test]
    fn stable_example_and_quadrature_oracle() {
        let (m, lam, alpha) = (0.4, 1.3, 0.75);
        let t = BernsteinTriplet::new(m, 0.0, LevyMeasure::stable_with_symbol(lam, alpha).unwrap()).unwrap();
        for &z in &[0.1, 1.0, 4.0] {
            assert_relative_eq!(t.phi(z).unwrap(), m + lam * z.powf(alpha), epsilon = 1e-12);
        }
        let LevyMeasure::Stable { scale, .. } = *t.levy() else { unreachable!() };
        let disc = LevyMeasure::discretize_stable(scale, alpha, 1e-6, 1e3, 4000).unwrap();
        let td = BernsteinTriplet::new(m, 0.0, disc.clone()).unwrap();
        let LevyMeasure::Discrete { truncation_error, .. } = disc else { unreachable!() };
        for &z in &[0.1, 1.0, 4.0] {
            let err = (td.phi(z).unwrap() - t.phi(z).unwrap()).abs();
            assert!(err < 1e-3 + truncation_error * z.max(1.0), "z={z}: {err}");
        }
    }

    #[test]
    fn value_at_zero_is_drift() {
        let t = BernsteinTriplet::new(0.3, 2.0, LevyMeasure::stable_with_symbol(1.0, 0.6).unwrap()).unwrap();
        assert_eq!(t.phi(0.0).unwrap(), 0.3);
    }

    #[test]
    fn zero_function_cannot_be_inverted() {
        let t = BernsteinTriplet::new(0.0, 1.0, LevyMeasure::None).unwrap();
        assert_eq!(t.eval(0.0).unwrap(), (0.0, None));
        assert!(matches!(t.limit_laplace(0.0), Err(Error::Domain(_))));
        assert!(matches!(t.phi(-1.0), Err(Error::Domain(_))));
    }
}
