//! Distances between samples, identity checks and the Hölder diagnostic.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::error::{Error, Result};
use crate::hawkes::{martingale_jumps, HawkesParams, HawkesPath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub description: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    /// Tolerance or significance level the verdict was taken against.
    pub threshold: Option<f64>,
    pub sizes: Vec<usize>,
    pub pass: bool,
}

impl TestReport {
    fn new(description: impl Into<String>, statistic: f64, sizes: Vec<usize>) -> Self {
        Self { description: description.into(), statistic, p_value: None, threshold: None, sizes, pass: true }
    }

    fn with_p(mut self, p: f64, level: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        self.p_value = Some(p);
        self.threshold = Some(level);
        self.pass = p > level;
        self
    }

    fn with_tolerance(mut self, tol: f64) -> Self {
        self.threshold = Some(tol);
        self.pass = self.statistic.abs() <= tol;
        self
    }
}

fn require_nonempty(a: &[f64], what: &str) -> Result<()> {
    if a.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} is empty")));
    }
    if a.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter(format!("{what} contains NaN")));
    }
    Ok(())
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    require_nonempty(a, "first sample")?;
    require_nonempty(b, "second sample")?;
    let (x, y) = (sorted(a), sorted(b));
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Two-sample KS test with the asymptotic Kolmogorov p-value, judged at `level`.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<TestReport> {
    let d = ks_statistic(a, b)?;
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let sq = ne.sqrt();
    let p = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    Ok(TestReport::new("two-sample Kolmogorov-Smirnov", d, vec![a.len(), b.len()]).with_p(p, level))
}

/// KS distance at the conventional level 0.01.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<TestReport> {
    ks_two_sample(a, b, 0.01)
}

/// One-sample KS test of integer counts against `Poisson(mean)`.
///
/// The asymptotic p-value is conservative for discrete laws.
pub fn ks_poisson(sample: &[u64], mean: f64, level: f64) -> Result<TestReport> {
    if sample.is_empty() {
        return Err(Error::InvalidParameter("sample is empty".into()));
    }
    let mut x = sample.to_vec();
    x.sort_unstable();
    let n = x.len() as f64;
    let cdf = |k: u64| -> f64 {
        if mean <= 0.0 {
            1.0
        } else {
            Poisson::new(mean).map(|p| p.cdf(k)).unwrap_or(1.0)
        }
    };
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < x.len() {
        let k = x[i];
        let below = i as f64 / n;
        let f_below = if k == 0 { 0.0 } else { cdf(k - 1) };
        while i < x.len() && x[i] == k {
            i += 1;
        }
        d = d.max((below - f_below).abs()).max((i as f64 / n - cdf(k)).abs());
    }
    let sq = n.sqrt();
    let p = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    Ok(TestReport::new(format!("one-sample KS against Poisson({mean})"), d, vec![x.len()]).with_p(p, level))
}

/// `∫ |F_a - F_b|`, the 1-Wasserstein distance of two empirical measures.
pub fn wasserstein1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    require_nonempty(a, "first sample")?;
    require_nonempty(b, "second sample")?;
    let (x, y) = (sorted(a), sorted(b));
    if x.len() == y.len() {
        return Ok(x.iter().zip(&y).map(|(u, v)| (u - v).abs()).sum::<f64>() / x.len() as f64);
    }
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut last = x[0].min(y[0]);
    let mut acc = 0.0;
    while i < x.len() || j < y.len() {
        let t = match (x.get(i), y.get(j)) {
            (Some(u), Some(v)) => u.min(*v),
            (Some(u), None) => *u,
            (None, Some(v)) => *v,
            (None, None) => unreachable!(),
        };
        acc += (i as f64 / na - j as f64 / nb).abs() * (t - last);
        last = t;
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
    }
    Ok(acc)
}

pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<TestReport> {
    let d = wasserstein1_distance(a, b)?;
    Ok(TestReport::new("Wasserstein-1 distance", d, vec![a.len(), b.len()]))
}

/// Chi-square test of per-path `(total, tagged)` counts against the conditional
/// law `Binomial(total, p)`; expected bin counts are pooled over paths and sparse
/// upper bins merged until each expects at least 5.
pub fn binomial_chi_square(pairs: &[(u64, u64)], p: f64, level: f64) -> Result<TestReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
    }
    let kmax = pairs.iter().map(|(m, _)| *m).max().unwrap_or(0) as usize;
    let mut observed = vec![0.0; kmax + 1];
    let mut expected = vec![0.0; kmax + 1];
    for &(m, k) in pairs {
        if k > m {
            return Err(Error::InvalidParameter(format!("tagged count {k} exceeds total {m}")));
        }
        observed[k as usize] += 1.0;
        let b = Binomial::new(p, m).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for (j, e) in expected.iter_mut().enumerate().take(m as usize + 1) {
            *e += b.pmf(j as u64);
        }
    }
    // merge bins left to right until each has expectation >= 5
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, e) in observed.iter().zip(&expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = bins.len().saturating_sub(1);
    let desc = format!("chi-square against pooled Binomial(m, {p}) with {df} degrees of freedom");
    if df == 0 {
        return Ok(TestReport::new(desc, 0.0, vec![pairs.len()]).with_p(1.0, level));
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(TestReport::new(desc, stat, vec![pairs.len()]).with_p(1.0 - dist.cdf(stat), level))
}

/// Pathwise `[M_i] = N_i` and `[M_i, M_j] = 0` from the jumps of `M = N - Λ`.
pub fn qv_identity_check(params: &HawkesParams, path: &HawkesPath) -> TestReport {
    let d = path.dim();
    let mut qv = vec![0.0; d * d];
    for (_, jump) in martingale_jumps(params, path) {
        for i in 0..d {
            for j in 0..d {
                qv[i * d + j] += jump[i] * jump[j];
            }
        }
    }
    let counts = path.counts_at(path.horizon());
    let mut residual: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { counts[i] as f64 } else { 0.0 };
            residual = residual.max((qv[i * d + j] - want).abs());
        }
    }
    TestReport::new("quadratic variation [M_i, M_j] = 1{i=j} N_i", residual, vec![path.len()]).with_tolerance(1e-10)
}

/// Both sides of the exchangeable moment decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeableMoment {
    pub n: usize,
    pub k: usize,
    /// `((1/n) Σ g(ξ_i))^K`
    pub lhs: f64,
    /// `n! / ((n-K)! n^K)`
    pub coefficient: f64,
    /// Mean of `Π g(ξ_{i_l})` over index tuples with distinct entries.
    pub distinct_average: f64,
    /// `n^{-K} Σ` over tuples with a repeated index.
    pub remainder: f64,
    pub rhs: f64,
}

/// `n! / ((n-K)! n^K)`.
pub fn falling_ratio(n: usize, k: usize) -> f64 {
    (0..k).map(|j| (n - j) as f64 / n as f64).product()
}

/// Full enumeration of `n^K` index tuples; refuses more than `10^7`.
pub fn exchangeable_moment_check(values: &[f64], g: impl Fn(f64) -> f64, k: usize) -> Result<(ExchangeableMoment, TestReport)> {
    let n = values.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= K <= n, got K = {k}, n = {n}")));
    }
    let size = (n as f64).powi(k as i32);
    if size > 1e7 {
        return Err(Error::Unsupported(format!(
            "enumeration of n^K = {size:.3e} tuples exceeds 1e7; use the sampled check"
        )));
    }
    let gv: Vec<f64> = values.iter().map(|v| g(*v)).collect();
    if gv.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("test function is not finite on the sample".into()));
    }
    let mean = gv.iter().sum::<f64>() / n as f64;
    let lhs = mean.powi(k as i32);
    let mut idx = vec![0usize; k];
    let (mut distinct_sum, mut distinct_count, mut repeated_sum) = (0.0, 0u64, 0.0);
    loop {
        let prod: f64 = idx.iter().map(|i| gv[*i]).product();
        let distinct = (0..k).all(|a| (a + 1..k).all(|b| idx[a] != idx[b]));
        if distinct {
            distinct_sum += prod;
            distinct_count += 1;
        } else {
            repeated_sum += prod;
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == k {
                let coefficient = falling_ratio(n, k);
                let distinct_average = distinct_sum / distinct_count as f64;
                let remainder = repeated_sum / size;
                let rhs = coefficient * distinct_average + remainder;
                let gap = (lhs - rhs).abs() / lhs.abs().max(1.0);
                let report = TestReport::new(
                    format!("exchangeable moment decomposition, n = {n}, K = {k}"),
                    gap,
                    vec![n],
                )
                .with_tolerance(1e-12);
                return Ok((ExchangeableMoment { n, k, lhs, coefficient, distinct_average, remainder, rhs }, report));
            }
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Monte Carlo version for large `n^K`: both averages estimated from `samples`
/// random tuples each.
pub fn exchangeable_moment_sampled<R: Rng + ?Sized>(
    values: &[f64],
    g: impl Fn(f64) -> f64,
    k: usize,
    samples: usize,
    rng: &mut R,
) -> Result<ExchangeableMoment> {
    let n = values.len();
    if k == 0 || k > n || samples == 0 {
        return Err(Error::InvalidParameter(format!("need 1 <= K <= n and samples > 0, got K = {k}, n = {n}")));
    }
    let gv: Vec<f64> = values.iter().map(|v| g(*v)).collect();
    let lhs = (gv.iter().sum::<f64>() / n as f64).powi(k as i32);
    let coefficient = falling_ratio(n, k);
    let mut distinct_sum = 0.0;
    let mut tuple = Vec::with_capacity(k);
    for _ in 0..samples {
        tuple.clear();
        while tuple.len() < k {
            let i = rng.random_range(0..n);
            if !tuple.contains(&i) {
                tuple.push(i);
            }
        }
        distinct_sum += tuple.iter().map(|i| gv[*i]).product::<f64>();
    }
    // repeated-index part: uniform tuples conditioned on a repeat, by rejection
    let repeat_mass = 1.0 - coefficient;
    let mut repeated_sum = 0.0;
    let mut accepted = 0usize;
    let mut tries = 0usize;
    while accepted < samples && repeat_mass > 0.0 && tries < samples * 1000 {
        tries += 1;
        tuple.clear();
        tuple.extend((0..k).map(|_| rng.random_range(0..n)));
        let distinct = (0..k).all(|a| (a + 1..k).all(|b| tuple[a] != tuple[b]));
        if !distinct {
            repeated_sum += tuple.iter().map(|i| gv[*i]).product::<f64>();
            accepted += 1;
        }
    }
    let distinct_average = distinct_sum / samples as f64;
    let remainder = if accepted > 0 { repeat_mass * repeated_sum / accepted as f64 } else { 0.0 };
    Ok(ExchangeableMoment {
        n,
        k,
        lhs,
        coefficient,
        distinct_average,
        remainder,
        rhs: coefficient * distinct_average + remainder,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    /// Slope clamped to `(0, 1]`.
    pub exponent: f64,
    /// Unclamped least-squares slope.
    pub raw_slope: f64,
    pub std_error: f64,
    pub degenerate: bool,
}

/// Slope of `log mean|x_{k+ℓ} - x_k|` against `log ℓ` over lags `ℓ = 2⁰..2⁶`.
pub fn holder_exponent(series: &[f64]) -> Result<HolderEstimate> {
    if series.len() < 256 {
        return Err(Error::InvalidParameter(format!(
            "Hölder diagnostic needs at least 256 nodes, got {}",
            series.len()
        )));
    }
    let mut pts = Vec::new();
    for p in 0..=6 {
        let lag = 1usize << p;
        let m = series.len() - lag;
        let mean = (0..m).map(|k| (series[k + lag] - series[k]).abs()).sum::<f64>() / m as f64;
        if mean == 0.0 {
            return Ok(HolderEstimate { exponent: 1.0, raw_slope: f64::NAN, std_error: 0.0, degenerate: true });
        }
        pts.push(((lag as f64).ln(), mean.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let std_error = (rss / (n - 2.0) / sxx).sqrt();
    Ok(HolderEstimate {
        exponent: slope.clamp(f64::MIN_POSITIVE, 1.0),
        raw_slope: slope,
        std_error,
        degenerate: false,
    })
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|value - target| <= z · se`, with a tiny absolute slack for exact matches.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.std_error + 1e-12 * target.abs().max(1.0)
    }
}

pub fn mean_estimate(xs: &[f64]) -> Result<Estimate> {
    require_nonempty(xs, "sample")?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(Estimate { value: mean, std_error: (var / n).sqrt() })
}

/// Unbiased sample variance with the delta-method standard error
/// `√((m₄ - s⁴) / n)`.
pub fn variance_estimate(xs: &[f64]) -> Result<Estimate> {
    if xs.len() < 2 {
        return Err(Error::InvalidParameter("variance needs at least two observations".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let s2 = m2 * n / (n - 1.0);
    Ok(Estimate { value: s2, std_error: ((m4 - m2 * m2).max(0.0) / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_edge_cases() {
        let a = [0.1, 0.5, 0.7];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.2], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(ks_statistic(&[], &a).is_err());
        assert!(ks_distance(&a, &a).unwrap().pass);
    }

    #[test]
    fn kolmogorov_tail_reference() {
        // P(K > 1.36) ≈ 0.05, P(K > 1.63) ≈ 0.01
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 5e-4);
    }

    #[test]
    fn wasserstein_examples() {
        assert_relative_eq!(wasserstein1_distance(&[2.0], &[5.5]).unwrap(), 3.5);
        assert_eq!(wasserstein1_distance(&[1.0, 3.0], &[3.0, 1.0]).unwrap(), 0.0);
        // unequal sizes use the cdf route
        let d = wasserstein1_distance(&[0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(d, 1.0 / 6.0, epsilon = 1e-15);
        assert!(wasserstein1_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn exchangeable_worked_example() {
        let (m, r) = exchangeable_moment_check(&[1.0, 2.0, 3.0], |x| x, 2).unwrap();
        assert_relative_eq!(m.lhs, 4.0, epsilon = 1e-14);
        assert_relative_eq!(m.coefficient, 6.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(m.distinct_average, 11.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(m.remainder, 14.0 / 9.0, epsilon = 1e-14);
        assert!(r.pass);
        let (m1, _) = exchangeable_moment_check(&[1.0, 2.0, 6.0], |x| x, 1).unwrap();
        assert_relative_eq!(m1.lhs, 3.0);
        assert_relative_eq!(m1.rhs, 3.0);
        assert_relative_eq!(falling_ratio(10_000, 3), 0.99970002, epsilon = 1e-8);
        let big = vec![0.5; 200];
        assert!(matches!(exchangeable_moment_check(&big, |x| x, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn holder_examples() {
        let ramp: Vec<f64> = (0..1000).map(|k| k as f64 * 0.01).collect();
        let h = holder_exponent(&ramp).unwrap();
        assert_relative_eq!(h.exponent, 1.0, epsilon = 1e-10);
        let flat = vec![3.0; 300];
        let h = holder_exponent(&flat).unwrap();
        assert!(h.degenerate && h.exponent == 1.0);
        assert!(holder_exponent(&ramp[..100]).is_err());
    }

    #[test]
    fn chi_square_handles_degenerate_inputs() {
        let r = binomial_chi_square(&[(0, 0), (0, 0)], 0.5, 0.01).unwrap();
        assert!(r.pass);
        assert!(binomial_chi_square(&[(1, 2)], 0.5, 0.01).is_err());
    }

    #[test]
    fn variance_estimate_of_constant() {
        let v = variance_estimate(&[2.0; 10]).unwrap();
        assert_eq!((v.value, v.std_error), (0.0, 0.0));
    }
}
