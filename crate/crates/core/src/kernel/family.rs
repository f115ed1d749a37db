//! Nearly unstable kernel families `φⁿ(t) = a_n b_n φ(b_n t)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{BernsteinTriplet, Kernel, KernelForm, LevyMeasure};
use crate::error::{Error, Result};

/// Time-scale sequence `b_n = scale · n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BSchedule {
    Linear {
        #[serde(default = "one")]
        scale: f64,
    },
    Power {
        #[serde(default = "one")]
        scale: f64,
        exponent: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for BSchedule {
    fn default() -> Self {
        BSchedule::Linear { scale: 1.0 }
    }
}

impl BSchedule {
    pub fn b(&self, n: u64) -> f64 {
        match *self {
            BSchedule::Linear { scale } => scale * n as f64,
            BSchedule::Power { scale, exponent } => scale * (n as f64).powf(exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        let (scale, exponent) = match *self {
            BSchedule::Linear { scale } => (scale, 1.0),
            BSchedule::Power { scale, exponent } => (scale, exponent),
        };
        if !(scale > 0.0) || !(exponent > 0.0) || !scale.is_finite() || !exponent.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "schedule needs positive scale and exponent, got ({scale}, {exponent})"
            )));
        }
        Ok(())
    }
}

/// The `n`-th member of a family.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub n: u64,
    pub a_n: f64,
    pub b_n: f64,
    pub beta_n: f64,
    pub kernel: Kernel,
    pub mu: DVector<f64>,
}

/// Kernel family with `a_n = 1 - c · b_n^{-γ}` and `β_n = 1 - a_n`.
///
/// `γ = 1` is the classical light-tail construction with `(1 - a_n) b_n → c`;
/// for heavy-tailed bases (`1 - ∫_0^t φ ~ K t^{-α}`) the gap exponent `γ = α`
/// yields the fractional limit.
#[derive(Debug, Clone)]
pub struct NearlyUnstableFamily {
    base: Kernel,
    c: f64,
    gap_exponent: f64,
    schedule: BSchedule,
    /// target `a = lim β_n μⁿ`
    limit_baseline: DVector<f64>,
}

impl NearlyUnstableFamily {
    /// Light-tail family: `a_n = 1 - c / b_n`.
    pub fn jr(base: Kernel, c: f64, schedule: BSchedule, limit_baseline: DVector<f64>) -> Result<Self> {
        Self::with_gap_exponent(base, c, 1.0, schedule, limit_baseline)
    }

    pub fn with_gap_exponent(
        base: Kernel,
        c: f64,
        gap_exponent: f64,
        schedule: BSchedule,
        limit_baseline: DVector<f64>,
    ) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        if !(gap_exponent > 0.0 && gap_exponent <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gap exponent must lie in (0, 1], got {gap_exponent}"
            )));
        }
        schedule.validate()?;
        let stability = base.l1_and_stability()?;
        if (stability.spectral_radius - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "base kernel must have spectral radius 1 (within 1e-6), got {}",
                stability.spectral_radius
            )));
        }
        if limit_baseline.len() != base.dim() {
            return Err(Error::Dimension { expected: base.dim(), got: limit_baseline.len() });
        }
        if limit_baseline.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("limit baseline must be nonnegative".into()));
        }
        Ok(Self { base, c, gap_exponent, schedule, limit_baseline })
    }

    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn schedule(&self) -> BSchedule {
        self.schedule
    }

    pub fn gap_exponent(&self) -> f64 {
        self.gap_exponent
    }

    pub fn limit_baseline(&self) -> &DVector<f64> {
        &self.limit_baseline
    }

    pub fn member(&self, n: u64) -> Result<FamilyMember> {
        let b_n = self.schedule.b(n);
        let gap = self.c * b_n.powf(-self.gap_exponent);
        if !(gap < 1.0) || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "1 - a_n = {gap} at n = {n}; need b_n large enough that a_n > 0"
            )));
        }
        let a_n = 1.0 - gap;
        let kernel = self.base.time_scaled(a_n, b_n)?;
        Ok(FamilyMember {
            n,
            a_n,
            b_n,
            beta_n: gap,
            kernel,
            mu: &self.limit_baseline / gap,
        })
    }

    /// Bernstein triplet of the limit measure `F` (univariate bases only).
    ///
    /// Light tail (finite first moment `m₁`, `γ = 1`): `Φ(z) = 1 + (m₁/c) z`.
    /// Power-law base with exponent `α` and `γ = α`: `Φ(z) = 1 + (K Γ(1-α)/c) z^α`
    /// where `K = lim t^α (1 - ∫_0^t φ)`.
    pub fn limit_triplet(&self) -> Result<BernsteinTriplet> {
        if self.base.dim() != 1 {
            return Err(Error::Unsupported(
                "limit triplet is only derived for univariate families".into(),
            ));
        }
        match self.base.form() {
            KernelForm::PowerLawTail { scale, exponent, .. } if *exponent < 1.0 => {
                let alpha = *exponent;
                if (self.gap_exponent - alpha).abs() > 1e-12 {
                    return Err(Error::Unsupported(format!(
                        "heavy-tail limit needs gap exponent equal to the tail exponent {alpha}"
                    )));
                }
                let k = scale[(0, 0)] / alpha;
                let lambda = k * gamma(1.0 - alpha) / self.c;
                BernsteinTriplet::new(1.0, 0.0, LevyMeasure::stable_with_symbol(lambda, alpha)?)
            }
            _ => {
                if (self.gap_exponent - 1.0).abs() > 1e-12 {
                    return Err(Error::Unsupported(
                        "light-tail limit needs gap exponent 1".into(),
                    ));
                }
                let m1 = self.base.first_moment()?[(0, 0)];
                BernsteinTriplet::new(1.0, m1 / self.c, LevyMeasure::None)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_family(c: f64) -> NearlyUnstableFamily {
        NearlyUnstableFamily::jr(
            Kernel::exponential_scalar(1.0, 1.0).unwrap(),
            c,
            BSchedule::default(),
            DVector::from_element(1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn jr_examples() {
        let f = exp_family(1.0);
        let m = f.member(100).unwrap();
        assert_relative_eq!(m.a_n, 0.99, epsilon = 1e-15);
        assert_relative_eq!(m.beta_n, 0.01, epsilon = 1e-15);
        assert_relative_eq!(m.mu[0] * m.beta_n, 1.0, epsilon = 1e-12);

        let m = f.member(10).unwrap();
        for &t in &[0.0, 0.05, 0.3] {
            assert_relative_eq!(m.kernel.entry(0, 0, t), 0.9 * 10.0 * (-10.0 * t).exp(), epsilon = 1e-13);
        }
        assert_relative_eq!(m.kernel.l1().unwrap()[(0, 0)], 0.9, epsilon = 1e-14);

        let a: Vec<f64> = [10, 100, 1000, 10_000].iter().map(|&n| f.member(n).unwrap().a_n).collect();
        assert!(a.windows(2).all(|w| w[1] > w[0]));
        assert!(1.0 - a[3] < 1e-3);
    }

    #[test]
    fn too_small_index_is_rejected() {
        let f = exp_family(2.0);
        assert!(matches!(f.member(1), Err(Error::InvalidParameter(_))));
        assert!(matches!(f.member(2), Err(Error::InvalidParameter(_))));
        assert!(f.member(3).is_ok());
    }

    #[test]
    fn base_must_be_critical() {
        let r = NearlyUnstableFamily::jr(
            Kernel::exponential_scalar(0.5, 1.0).unwrap(),
            1.0,
            BSchedule::default(),
            DVector::from_element(1, 1.0),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn light_tail_triplet() {
        let f = exp_family(2.0);
        let t = f.limit_triplet().unwrap();
        assert_relative_eq!(t.drift(), 1.0);
        assert_relative_eq!(t.linear(), 0.5);
    }

    #[test]
    fn heavy_tail_triplet_matches_member_transforms() {
        let alpha = 0.75;
        let base = Kernel::power_law_normalized(1.0, alpha, 1.0).unwrap();
        let f = NearlyUnstableFamily::with_gap_exponent(
            base,
            1.0,
            alpha,
            BSchedule::default(),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let trip = f.limit_triplet().unwrap();
        // L_{Fⁿ}(z) = β_n L/(1-L) should approach 1/Φ(z)
        let z = nalgebra::Complex::new(1.0, 0.0);
        let limit = trip.limit_laplace(1.0).unwrap();
        let mut errs = Vec::new();
        for n in [1_000u64, 100_000, 10_000_000] {
            let m = f.member(n).unwrap();
            let l = m.kernel.laplace_entry(0, 0, z).re;
            errs.push((m.beta_n * l / (1.0 - l) - limit).abs());
        }
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[2] < 0.02, "{errs:?}");
    }
}
