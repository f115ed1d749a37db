//! Multivariate Hawkes processes: exact simulation, compensators and the
//! spatial rescaling `(β²Λ, β²N, βM)`.

mod intensity;

pub use intensity::IntensityTracker;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;

#[derive(Debug, Clone)]
pub struct HawkesParams {
    mu: Vec<f64>,
    kernel: Kernel,
    horizon: f64,
}

impl HawkesParams {
    pub fn new(mu: DVector<f64>, kernel: Kernel, horizon: f64) -> Result<Self> {
        if mu.len() != kernel.dim() {
            return Err(Error::Dimension { expected: kernel.dim(), got: mu.len() });
        }
        if mu.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParameter("baseline must be finite and nonnegative".into()));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { mu: mu.iter().copied().collect(), kernel, horizon })
    }

    /// Univariate shortcut.
    pub fn univariate(mu: f64, kernel: Kernel, horizon: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mu), kernel, horizon)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Warnings for parameters outside the stable regime.
    pub fn warnings(&self) -> Vec<String> {
        match self.kernel.l1_and_stability() {
            Ok(s) if s.stable => Vec::new(),
            Ok(s) => vec![format!("spectral radius {} >= 1: process may explode", s.spectral_radius)],
            Err(e) => vec![e.to_string()],
        }
    }
}

/// Events of a Hawkes path on `(0, T]`, merged and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesPath {
    dim: usize,
    horizon: f64,
    times: Vec<f64>,
    components: Vec<u32>,
}

impl HawkesPath {
    pub fn from_events(dim: usize, horizon: f64, times: Vec<f64>, components: Vec<u32>) -> Result<Self> {
        if times.len() != components.len() {
            return Err(Error::Dimension { expected: times.len(), got: components.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("event times must be strictly increasing".into()));
        }
        if components.iter().any(|c| *c as usize >= dim) {
            return Err(Error::InvalidParameter("event component out of range".into()));
        }
        Ok(Self { dim, horizon, times, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn components(&self) -> &[u32] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component_times(&self, i: usize) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.components)
            .filter(|(_, c)| **c as usize == i)
            .map(|(t, _)| *t)
            .collect()
    }

    /// `N_i(t)` (events `<= t`) for every component.
    pub fn counts_at(&self, t: f64) -> Vec<u64> {
        let mut out = vec![0; self.dim];
        for (_, c) in self.times.iter().zip(&self.components).take_while(|(s, _)| **s <= t) {
            out[*c as usize] += 1;
        }
        out
    }

    /// Total event count on `[0, T]`.
    pub fn total(&self) -> usize {
        self.times.len()
    }

    /// CSV columns `component, time`.
    pub fn event_columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let rows = self
            .times
            .iter()
            .zip(&self.components)
            .map(|(t, c)| vec![*c as f64, *t])
            .collect();
        (vec!["component".into(), "time".into()], rows)
    }
}

fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Ogata thinning with the post-event intensity as majorant.
///
/// Requires entrywise nonincreasing kernels so that `λ(t⁺)` dominates the
/// intensity until the next accepted event.
pub fn simulate_thinning<R: Rng + ?Sized>(params: &HawkesParams, rng: &mut R) -> Result<HawkesPath> {
    let kernel = params.kernel();
    if !kernel.is_nonincreasing() {
        return Err(Error::Unsupported(
            "thinning needs a nonincreasing kernel; use the cluster sampler".into(),
        ));
    }
    let d = params.dim();
    let horizon = params.horizon();
    let mut tracker = IntensityTracker::new(kernel);
    let mut lam = vec![0.0; d];
    let mut times = Vec::new();
    let mut components = Vec::new();
    let mut t = 0.0;
    let mut bound = tracker.intensities(params.mu(), &mut lam);
    while bound > 0.0 {
        let s = t + exp_draw(rng, bound);
        if s > horizon {
            break;
        }
        if !(s > t) {
            // floating-point tie with the previous time: redraw
            continue;
        }
        tracker.advance(s);
        let total = tracker.intensities(params.mu(), &mut lam);
        let u = rng.random::<f64>() * bound;
        if u < total {
            let mut acc = 0.0;
            let mut comp = d - 1;
            for (i, l) in lam.iter().enumerate() {
                acc += l;
                if u < acc {
                    comp = i;
                    break;
                }
            }
            tracker.add_event(comp);
            times.push(s);
            components.push(comp as u32);
            bound = tracker.intensities(params.mu(), &mut lam);
        } else {
            bound = total;
        }
        t = s;
    }
    Ok(HawkesPath { dim: d, horizon, times, components })
}

pub fn poisson_draw<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Branching (immigrant/offspring) construction; refuses unstable kernels.
pub fn simulate_cluster<R: Rng + ?Sized>(params: &HawkesParams, rng: &mut R) -> Result<HawkesPath> {
    let kernel = params.kernel();
    let stability = kernel.l1_and_stability()?;
    if !stability.stable {
        return Err(Error::Unsupported(format!(
            "cluster sampler needs spectral radius < 1, got {}",
            stability.spectral_radius
        )));
    }
    let d = params.dim();
    let horizon = params.horizon();
    loop {
        let mut events: Vec<(f64, u32)> = Vec::new();
        let mut queue: Vec<(f64, usize)> = Vec::new();
        for (i, &m) in params.mu().iter().enumerate() {
            for _ in 0..poisson_draw(rng, m * horizon) {
                // (0, T]
                let t = horizon * (1.0 - rng.random::<f64>());
                queue.push((t, i));
            }
        }
        while let Some((s, j)) = queue.pop() {
            events.push((s, j as u32));
            for i in 0..d {
                let mass = stability.l1[(i, j)];
                for _ in 0..poisson_draw(rng, mass) {
                    let child = s + kernel.sample_delay(i, j, rng);
                    if child <= horizon && child > s {
                        queue.push((child, i));
                    }
                }
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        if events.windows(2).all(|w| w[1].0 > w[0].0) {
            let (times, components) = events.into_iter().unzip();
            return Ok(HawkesPath { dim: d, horizon, times, components });
        }
        // a timestamp tie (probability zero): draw a fresh realization
    }
}

/// Intensity, counts, compensator and martingale part on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSeries {
    pub grid: Grid,
    pub dim: usize,
    /// `λ_i(t_k)` from events strictly before `t_k`, `nodes x d`.
    pub intensity: Vec<f64>,
    pub counts: Vec<f64>,
    pub compensator: Vec<f64>,
    pub martingale: Vec<f64>,
}

impl PathSeries {
    pub fn at(&self, field: &[f64], k: usize, i: usize) -> f64 {
        field[k * self.dim + i]
    }

    /// CSV columns `t, lambda_i.., N_i.., Lambda_i.., M_i..`.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let d = self.dim;
        let mut header = vec!["t".to_string()];
        for prefix in ["lambda", "N", "Lambda", "M"] {
            header.extend((0..d).map(|i| format!("{prefix}_{i}")));
        }
        let rows = (0..self.grid.nodes())
            .map(|k| {
                let mut row = vec![self.grid.node(k)];
                for field in [&self.intensity, &self.counts, &self.compensator, &self.martingale] {
                    row.extend_from_slice(&field[k * d..(k + 1) * d]);
                }
                row
            })
            .collect();
        (header, rows)
    }
}

/// `Λ_i(t) = μ_i t + Σ_j Σ_{τ ∈ N_j, τ < t} ∫_0^{t-τ} φ_ij` evaluated exactly.
pub fn compensator_at(params: &HawkesParams, path: &HawkesPath, t: f64, inclusive: bool) -> Vec<f64> {
    let d = params.dim();
    let kernel = params.kernel();
    let mut out: Vec<f64> = params.mu().iter().map(|m| m * t).collect();
    for (&tau, &j) in path.times.iter().zip(&path.components) {
        if tau > t || (!inclusive && tau == t) {
            break;
        }
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o += kernel.primitive_entry(i, j as usize, t - tau);
        }
    }
    out
}

/// Exact compensator and martingale part of `path` on the nodes of `grid`.
pub fn compensator_martingale(params: &HawkesParams, path: &HawkesPath, grid: &Grid) -> Result<PathSeries> {
    if grid.end() > path.horizon * (1.0 + 1e-12) {
        return Err(Error::OutOfRange { t: grid.end(), horizon: path.horizon });
    }
    if params.dim() != path.dim {
        return Err(Error::Dimension { expected: params.dim(), got: path.dim });
    }
    let d = path.dim;
    let nodes = grid.nodes();
    let kernel = params.kernel();
    let mut intensity = vec![0.0; nodes * d];
    let mut counts = vec![0.0; nodes * d];
    let mut compensator = vec![0.0; nodes * d];
    let mut tracker = IntensityTracker::new(kernel);
    let mut running = vec![0u64; d];
    let mut next = 0;
    for k in 0..nodes {
        let t = grid.node(k);
        while next < path.len() && path.times[next] < t {
            tracker.advance(path.times[next]);
            let j = path.components[next] as usize;
            tracker.add_event(j);
            running[j] += 1;
            next += 1;
        }
        tracker.advance(t);
        for i in 0..d {
            intensity[k * d + i] = params.mu()[i] + tracker.excitation(i);
        }
        // counts are right-continuous: include an event sitting exactly on the node
        let mut on_node = vec![0u64; d];
        let mut p = next;
        while p < path.len() && path.times[p] == t {
            on_node[path.components[p] as usize] += 1;
            p += 1;
        }
        for i in 0..d {
            counts[k * d + i] = (running[i] + on_node[i]) as f64;
        }
        let markov: Option<Vec<f64>> = (0..d)
            .map(|i| tracker.integrated_excitation(i, &running).map(|e| params.mu()[i] * t + e))
            .collect();
        let v = markov.unwrap_or_else(|| compensator_at(params, path, t, false));
        compensator[k * d..(k + 1) * d].copy_from_slice(&v);
    }
    let martingale = counts.iter().zip(&compensator).map(|(n, l)| n - l).collect();
    Ok(PathSeries { grid: *grid, dim: d, intensity, counts, compensator, martingale })
}

/// `(β²Λ, β²N, βM)` on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledTriple {
    pub beta: f64,
    pub grid: Grid,
    pub dim: usize,
    pub compensator: Vec<f64>,
    pub counts: Vec<f64>,
    pub martingale: Vec<f64>,
}

impl RescaledTriple {
    /// Largest `|N⁽ⁿ⁾ - Λ⁽ⁿ⁾ - β M⁽ⁿ⁾|` relative to the magnitude of the terms.
    pub fn identity_residual(&self) -> f64 {
        self.counts
            .iter()
            .zip(&self.compensator)
            .zip(&self.martingale)
            .map(|((n, l), m)| {
                let scale = n.abs().max(l.abs()).max(1e-300);
                (n - l - self.beta * m).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

pub fn rescale_path(series: &PathSeries, beta: f64) -> Result<RescaledTriple> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("β must be positive, got {beta}")));
    }
    let b2 = beta * beta;
    Ok(RescaledTriple {
        beta,
        grid: series.grid,
        dim: series.dim,
        compensator: series.compensator.iter().map(|v| b2 * v).collect(),
        counts: series.counts.iter().map(|v| b2 * v).collect(),
        martingale: series.martingale.iter().map(|v| beta * v).collect(),
    })
}

/// Jumps of `M = N - Λ` at each event time, as `(time, ΔM)` with `ΔM` a `d`-vector.
pub fn martingale_jumps(params: &HawkesParams, path: &HawkesPath) -> Vec<(f64, Vec<f64>)> {
    let d = path.dim;
    let mut out = Vec::with_capacity(path.len());
    let mut idx = 0;
    while idx < path.len() {
        let t = path.times[idx];
        let mut dn = vec![0.0; d];
        while idx < path.len() && path.times[idx] == t {
            dn[path.components[idx] as usize] += 1.0;
            idx += 1;
        }
        let after = compensator_at(params, path, t, true);
        let before = compensator_at(params, path, t, false);
        let jump = (0..d).map(|i| dn[i] - (after[i] - before[i])).collect();
        out.push((t, jump));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp_params() -> HawkesParams {
        HawkesParams::univariate(1.0, Kernel::exponential_scalar(1.0, 2.0).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn zero_baseline_gives_no_events() {
        let p = HawkesParams::univariate(0.0, Kernel::exponential_scalar(1.0, 2.0).unwrap(), 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulate_thinning(&p, &mut rng).unwrap().is_empty());
        assert!(simulate_cluster(&p, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn thinning_produces_strictly_increasing_times() {
        let p = HawkesParams::new(
            DVector::from_vec(vec![0.5, 0.8]),
            Kernel::exponential(dmatrix![0.3, 0.2; 0.2, 0.3], dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap(),
            20.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let path = simulate_thinning(&p, &mut rng).unwrap();
        assert!(path.len() > 10);
        assert!(path.times().windows(2).all(|w| w[1] > w[0]));
        assert!(path.times().iter().all(|t| *t > 0.0 && *t <= 20.0));
    }

    #[test]
    fn non_monotone_grid_kernel_is_refused_by_thinning() {
        let k = Kernel::grid(0.5, vec![dmatrix![0.1], dmatrix![0.3]]).unwrap();
        let p = HawkesParams::univariate(1.0, k, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(simulate_thinning(&p, &mut rng), Err(Error::Unsupported(_))));
        assert!(simulate_cluster(&p, &mut rng).is_ok());
    }

    #[test]
    fn unstable_kernel_is_refused_by_cluster() {
        let p = HawkesParams::univariate(1.0, Kernel::exponential_scalar(3.0, 2.0).unwrap(), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(simulate_cluster(&p, &mut rng), Err(Error::Unsupported(_))));
        assert_eq!(p.warnings().len(), 1);
    }

    // trapezoid on a fine mesh between events: an independent oracle for Λ(T)
    fn quadrature_compensator(p: &HawkesParams, path: &HawkesPath, t_end: f64) -> f64 {
        let n = 200_000;
        let h = t_end / n as f64;
        let lam = |s: f64| {
            p.mu()[0]
                + path
                    .times()
                    .iter()
                    .take_while(|tau| **tau < s)
                    .map(|tau| p.kernel().entry(0, 0, s - tau))
                    .sum::<f64>()
        };
        // Simpson on each mesh cell; a cell straddling an event loses O(h) accuracy, so
        // the mesh is aligned to the events by splitting
        let mut cuts: Vec<f64> = path.times().iter().copied().filter(|t| *t < t_end).collect();
        cuts.insert(0, 0.0);
        cuts.push(t_end);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = (((b - a) / h).ceil() as usize).max(2);
            let hh = (b - a) / m as f64;
            for c in 0..m {
                // nudge the first node past the event so the jump is included
                let x0 = a + c as f64 * hh + if c == 0 { 1e-13 } else { 0.0 };
                let x1 = a + (c + 1) as f64 * hh;
                acc += (x1 - x0) / 6.0 * (lam(x0) + 4.0 * lam(0.5 * (x0 + x1)) + lam(x1));
            }
        }
        acc
    }

    #[test]
    fn compensator_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kernel in [
            Kernel::exponential_scalar(1.0, 2.0).unwrap(),
            Kernel::power_law_normalized(0.5, 0.75, 0.5).unwrap(),
        ] {
            let p = HawkesParams::univariate(2.0, kernel, 3.0).unwrap();
            let path = simulate_thinning(&p, &mut rng).unwrap();
            assert!(!path.is_empty());
            let g = Grid::new(3.0, 0.5).unwrap();
            let s = compensator_martingale(&p, &path, &g).unwrap();
            let exact = s.compensator[g.cells()];
            let quad = quadrature_compensator(&p, &path, 3.0);
            assert!((exact - quad).abs() < 1e-8, "{exact} vs {quad}");
            assert_eq!(s.compensator[0], 0.0);
            assert!(s.compensator.windows(2).all(|w| w[1] >= w[0]));
            for k in 0..g.nodes() {
                assert_eq!(s.counts[k] - s.compensator[k], s.martingale[k]);
            }
        }
    }

    #[test]
    fn multivariate_compensator_matches_direct_sum() {
        let p = HawkesParams::new(
            DVector::from_vec(vec![0.5, 0.8]),
            Kernel::exponential(dmatrix![0.3, 0.2; 0.0, 0.3], dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap(),
            5.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let path = simulate_thinning(&p, &mut rng).unwrap();
        let g = Grid::new(5.0, 0.25).unwrap();
        let s = compensator_martingale(&p, &path, &g).unwrap();
        for k in 0..g.nodes() {
            let direct = compensator_at(&p, &path, g.node(k), false);
            for i in 0..2 {
                assert_relative_eq!(s.compensator[k * 2 + i], direct[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn grid_past_horizon_is_rejected() {
        let p = exp_params();
        let path = HawkesPath::from_events(1, 1.0, vec![], vec![]).unwrap();
        let g = Grid::new(2.0, 0.5).unwrap();
        assert!(matches!(compensator_martingale(&p, &path, &g), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn rescaling() {
        let p = exp_params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let path = simulate_thinning(&p, &mut rng).unwrap();
        let g = Grid::new(1.0, 0.1).unwrap();
        let s = compensator_martingale(&p, &path, &g).unwrap();
        let id = rescale_path(&s, 1.0).unwrap();
        assert_eq!(id.counts, s.counts);
        assert_eq!(id.martingale, s.martingale);
        let r = rescale_path(&s, 0.05).unwrap();
        assert!(r.identity_residual() < 1e-12);
        assert!(rescale_path(&s, 0.0).is_err());
    }

    #[test]
    fn martingale_jumps_are_unit() {
        let p = HawkesParams::new(
            DVector::from_vec(vec![1.0, 1.0]),
            Kernel::exponential(dmatrix![0.3, 0.2; 0.2, 0.3], Matrix2::from_element(2, 2, 1.5)).unwrap(),
            5.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let path = simulate_thinning(&p, &mut rng).unwrap();
        for (_, jump) in martingale_jumps(&p, &path) {
            let ones = jump.iter().filter(|v| **v == 1.0).count();
            let zeros = jump.iter().filter(|v| **v == 0.0).count();
            assert_eq!((ones, zeros), (1, 1));
        }
    }

    type Matrix2 = nalgebra::DMatrix<f64>;
}
