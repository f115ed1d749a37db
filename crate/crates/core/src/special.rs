//! Special functions used by kernel transforms and limit kernels.

use nalgebra::Complex;
use statrs::function::gamma::gamma;

type C64 = Complex<f64>;

/// `J(w) = ∫_0^∞ e^{-w s} (1 + s)^{-1-alpha} ds` for `Re w >= 0`, `alpha > 0`.
///
/// Equals `e^w w^alpha Γ(-alpha, w)`. Small `|w|` uses the lower incomplete
/// gamma series, larger `|w|` the Legendre continued fraction.
pub fn power_tail_transform(alpha: f64, w: C64) -> C64 {
    if w.norm() == 0.0 {
        return C64::new(1.0 / alpha, 0.0);
    }
    let integer_alpha = (alpha - alpha.round()).abs() < 1e-12;
    if w.norm() < 1.0 && !integer_alpha {
        power_tail_series(alpha, w)
    } else {
        power_tail_continued_fraction(alpha, w)
    }
}

fn power_tail_series(alpha: f64, w: C64) -> C64 {
    let a = -alpha;
    // S = sum_k w^k / (a (a+1) ... (a+k))
    let mut term = C64::new(1.0 / a, 0.0);
    let mut sum = term;
    for k in 1..500 {
        term *= w / (a + k as f64);
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    w.exp() * w.powf(alpha) * gamma(a) - sum
}

fn power_tail_continued_fraction(alpha: f64, w: C64) -> C64 {
    const TINY: f64 = 1e-300;
    let a = -alpha;
    let mut b = w + (1.0 - a);
    let mut c = C64::new(1.0 / TINY, 0.0);
    let mut d = C64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 1..20_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = d * an + b;
        if d.norm() < TINY {
            d = C64::new(TINY, 0.0);
        }
        c = b + C64::new(an, 0.0) / c;
        if c.norm() < TINY {
            c = C64::new(TINY, 0.0);
        }
        d = C64::new(1.0, 0.0) / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h
}

/// One-parameter Mittag-Leffler function `E_alpha(-x)` for `x >= 0`, `0 < alpha < 1`.
pub fn mittag_leffler_neg(alpha: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x <= 3.0 {
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 0..400 {
            let term = pow / gamma(alpha * k as f64 + 1.0);
            sum += term;
            if k > 5 && term.abs() < 1e-18 {
                break;
            }
            pow *= -x;
        }
        sum
    } else {
        mittag_leffler_integral(alpha, x)
    }
}

// E_a(-x) = sin(a pi)/pi ∫_0^∞ r^{a-1} e^{-r x^{1/a}} / (r^{2a} + 2 r^a cos(a pi) + 1) dr,
// integrated in u = ln r by composite Simpson.
fn mittag_leffler_integral(alpha: f64, x: f64) -> f64 {
    let s = x.powf(1.0 / alpha);
    let (sin_a, cos_a) = (alpha * std::f64::consts::PI).sin_cos();
    let f = |u: f64| {
        let r = u.exp();
        let ra = r.powf(alpha);
        ra * (-r * s).exp() / (ra * ra + 2.0 * ra * cos_a + 1.0)
    };
    let lo = -60.0 / alpha.max(0.05);
    let hi = (60.0 / s).ln();
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + k as f64 * h);
    }
    sin_a / std::f64::consts::PI * acc * h / 3.0
}
