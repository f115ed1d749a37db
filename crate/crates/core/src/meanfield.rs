//! Exchangeable mean-field Hawkes system with `n` particles sharing the intensity
//! `λ₀ⁿ = μ₀ⁿ/n + (1/n) Σ_j ∫ φⁿ(t-s) dN_j(s)`, and the auxiliary system `θⁿ`
//! whose feedback ignores the first `K` (tagged) particles.
//!
//! The aggregate `N̄ⁿ = Σ_i N_i` is a univariate Hawkes process with baseline
//! `μ₀ⁿ` and kernel `φⁿ`; since all particles share one intensity, each aggregate
//! event belongs to a uniformly chosen particle.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hawkes::{simulate_thinning, HawkesParams, HawkesPath, IntensityTracker};
use crate::kernel::Kernel;
use crate::limits::{EmpiricalMeasureSnapshot, SnapshotSource};

#[derive(Debug, Clone)]
pub struct MeanFieldParams {
    pub particles: usize,
    pub mu0: f64,
    pub kernel: Kernel,
    pub tagged: usize,
    pub horizon: f64,
    pub beta: f64,
}

impl MeanFieldParams {
    pub fn new(particles: usize, mu0: f64, kernel: Kernel, tagged: usize, horizon: f64, beta: f64) -> Result<Self> {
        if particles == 0 {
            return Err(Error::Config("particle count n must be at least 1".into()));
        }
        if tagged > particles {
            return Err(Error::Config(format!(
                "tagged count K = {tagged} exceeds particle count n = {particles}"
            )));
        }
        if kernel.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: kernel.dim() });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("β must be positive, got {beta}")));
        }
        HawkesParams::univariate(mu0, kernel.clone(), horizon)?;
        Ok(Self { particles, mu0, kernel, tagged, horizon, beta })
    }

    fn aggregate(&self) -> HawkesParams {
        HawkesParams::univariate(self.mu0, self.kernel.clone(), self.horizon).expect("validated")
    }

    /// `n β_n²`.
    pub fn zeta_n(&self) -> f64 {
        self.particles as f64 * self.beta * self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystemPath {
    pub particles: usize,
    pub tagged: usize,
    pub beta: f64,
    mu0: f64,
    /// Aggregate univariate Hawkes path `N̄ⁿ`.
    pub aggregate: HawkesPath,
    /// Particle index (0-based) of each aggregate event.
    pub assignment: Vec<u32>,
}

impl ParticleSystemPath {
    /// `N_i(t)` for every particle.
    pub fn particle_counts_at(&self, t: f64) -> Vec<u64> {
        let mut out = vec![0u64; self.particles];
        for (s, p) in self.aggregate.times().iter().zip(&self.assignment) {
            if *s > t {
                break;
            }
            out[*p as usize] += 1;
        }
        out
    }

    pub fn tagged_times(&self, i: usize) -> Vec<f64> {
        self.aggregate
            .times()
            .iter()
            .zip(&self.assignment)
            .filter(|(_, p)| **p as usize == i)
            .map(|(t, _)| *t)
            .collect()
    }

    /// Same path with particle labels permuted by `perm` (`new = perm[old]`).
    pub fn relabeled(&self, perm: &[u32]) -> Result<Self> {
        if perm.len() != self.particles {
            return Err(Error::Dimension { expected: self.particles, got: perm.len() });
        }
        let mut out = self.clone();
        out.assignment = self.assignment.iter().map(|p| perm[*p as usize]).collect();
        Ok(out)
    }
}

/// Grid series of a particle system.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldSeries {
    pub grid: Grid,
    pub particles: usize,
    pub beta: f64,
    /// `λ₀ⁿ(t_k)` (left limits).
    pub lambda0: Vec<f64>,
    pub aggregate_counts: Vec<f64>,
    /// `Λ̄ⁿ = n Λ₀ⁿ`.
    pub aggregate_compensator: Vec<f64>,
    /// `N_i` for tagged `i`, outer index `i`.
    pub tagged_counts: Vec<Vec<f64>>,
    /// `M_i = N_i - Λ₀ⁿ`.
    pub tagged_martingales: Vec<Vec<f64>>,
}

impl MeanFieldSeries {
    /// `(β²Λ̄, β²N̄, βM̄)`.
    pub fn rescaled_aggregate(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let b = self.beta;
        let lam = self.aggregate_compensator.iter().map(|v| b * b * v).collect();
        let cnt = self.aggregate_counts.iter().map(|v| b * b * v).collect();
        let mart = self
            .aggregate_counts
            .iter()
            .zip(&self.aggregate_compensator)
            .map(|(n, l)| b * (n - l))
            .collect();
        (lam, cnt, mart)
    }

    /// `(n β² N_i, √n β M_i)` for tagged `i`.
    pub fn rescaled_tagged(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.particles as f64;
        let cnt = self.tagged_counts[i].iter().map(|v| n * self.beta * self.beta * v).collect();
        let mart = self.tagged_martingales[i].iter().map(|v| n.sqrt() * self.beta * v).collect();
        (cnt, mart)
    }

    /// `n β² Λ₀ⁿ = β² Λ̄ⁿ`.
    pub fn rescaled_common_compensator(&self) -> Vec<f64> {
        self.aggregate_compensator.iter().map(|v| self.beta * self.beta * v).collect()
    }

    /// CSV columns `t, lambda0, Nbar, Lambdabar, N_i.., M_i..`.
    pub fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let k = self.tagged_counts.len();
        let mut header: Vec<String> = ["t", "lambda0", "Nbar", "Lambdabar"].map(String::from).to_vec();
        header.extend((0..k).map(|i| format!("N_{i}")));
        header.extend((0..k).map(|i| format!("M_{i}")));
        let rows = (0..self.grid.nodes())
            .map(|node| {
                let mut row = vec![
                    self.grid.node(node),
                    self.lambda0[node],
                    self.aggregate_counts[node],
                    self.aggregate_compensator[node],
                ];
                row.extend(self.tagged_counts.iter().map(|c| c[node]));
                row.extend(self.tagged_martingales.iter().map(|c| c[node]));
                row
            })
            .collect();
        (header, rows)
    }
}

/// Aggregate Hawkes path with uniformly assigned particle labels.
pub fn simulate_particles<R: Rng + ?Sized>(params: &MeanFieldParams, rng: &mut R) -> Result<ParticleSystemPath> {
    let aggregate = simulate_thinning(&params.aggregate(), rng)?;
    let n = params.particles as u32;
    let assignment = (0..aggregate.len()).map(|_| rng.random_range(0..n)).collect();
    Ok(ParticleSystemPath {
        particles: params.particles,
        tagged: params.tagged,
        beta: params.beta,
        mu0: params.mu0,
        aggregate,
        assignment,
    })
}

/// Excitation of a univariate kernel from events strictly before each node,
/// plus the integrated excitation, by one forward sweep.
fn sweep(kernel: &Kernel, mu0: f64, times: &[f64], grid: &Grid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nodes = grid.nodes();
    let mut intensity = vec![0.0; nodes];
    let mut counts = vec![0.0; nodes];
    let mut comp = vec![0.0; nodes];
    let mut tracker = IntensityTracker::new(kernel);
    let mut next = 0;
    for k in 0..nodes {
        let t = grid.node(k);
        while next < times.len() && times[next] < t {
            tracker.advance(times[next]);
            tracker.add_event(0);
            next += 1;
        }
        tracker.advance(t);
        intensity[k] = mu0 + tracker.excitation(0);
        let on_node = times[next..].iter().take_while(|s| **s == t).count();
        counts[k] = (next + on_node) as f64;
        comp[k] = mu0 * t
            + tracker.integrated_excitation(0, &[next as u64]).unwrap_or_else(|| {
                times[..next].iter().map(|s| kernel.primitive_entry(0, 0, t - s)).sum()
            });
    }
    (intensity, counts, comp)
}

pub fn mean_field_series(params: &MeanFieldParams, path: &ParticleSystemPath, grid: &Grid) -> Result<MeanFieldSeries> {
    if grid.end() > path.aggregate.horizon() * (1.0 + 1e-12) {
        return Err(Error::OutOfRange { t: grid.end(), horizon: path.aggregate.horizon() });
    }
    let n = path.particles as f64;
    let (lam, counts, comp) = sweep(&params.kernel, path.mu0, path.aggregate.times(), grid);
    let mut tagged_counts = Vec::with_capacity(path.tagged);
    let mut tagged_martingales = Vec::with_capacity(path.tagged);
    for i in 0..path.tagged {
        let times = path.tagged_times(i);
        let c: Vec<f64> = (0..grid.nodes())
            .map(|k| times.iter().take_while(|s| **s <= grid.node(k)).count() as f64)
            .collect();
        let m = c.iter().zip(&comp).map(|(ci, l)| ci - l / n).collect();
        tagged_counts.push(c);
        tagged_martingales.push(m);
    }
    Ok(MeanFieldSeries {
        grid: *grid,
        particles: path.particles,
        beta: path.beta,
        lambda0: lam.iter().map(|v| v / n).collect(),
        aggregate_counts: counts,
        aggregate_compensator: comp,
        tagged_counts,
        tagged_martingales,
    })
}

/// Empirical measures `P_N⁽ⁿ⁾(t), P_M⁽ⁿ⁾(t)` as joint pairs
/// `(n β² N_i(t), √n β M_i(t))` over all particles, each with mass `1/n`.
pub fn empirical_snapshot(
    params: &MeanFieldParams,
    path: &ParticleSystemPath,
    times: &[f64],
) -> Result<Vec<EmpiricalMeasureSnapshot>> {
    let n = path.particles as f64;
    let b = path.beta;
    times
        .iter()
        .map(|&t| {
            if !(t >= 0.0) || t > path.aggregate.horizon() {
                return Err(Error::OutOfRange { t, horizon: path.aggregate.horizon() });
            }
            let counts = path.particle_counts_at(t);
            let events: Vec<f64> =
                path.aggregate.times().iter().copied().take_while(|s| *s < t).collect();
            let lambda_bar = path.mu0 * t
                + events.iter().map(|s| params.kernel.primitive_entry(0, 0, t - s)).sum::<f64>();
            let lambda0 = lambda_bar / n;
            let points = counts
                .iter()
                .map(|c| {
                    let c = *c as f64;
                    (n * b * b * c, n.sqrt() * b * (c - lambda0))
                })
                .collect();
            EmpiricalMeasureSnapshot::uniform(t, SnapshotSource::Simulation { particles: path.particles }, points)
        })
        .collect()
}

/// Auxiliary system sharing the Poisson marks of the main system.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySystemPath {
    pub tagged: usize,
    /// Events of `𝒩ⁿ_i` over all particles, sorted.
    pub times: Vec<f64>,
    pub particles: Vec<u32>,
}

impl AuxiliarySystemPath {
    /// Events that feed `θⁿ` (particles `K..n`).
    pub fn feedback_times(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.particles)
            .filter(|(_, p)| **p as usize >= self.tagged)
            .map(|(t, _)| *t)
            .collect()
    }

    pub fn particle_times(&self, i: usize) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.particles)
            .filter(|(_, p)| **p as usize == i)
            .map(|(t, _)| *t)
            .collect()
    }
}

/// Grid series of the auxiliary system.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySeries {
    pub grid: Grid,
    /// `θⁿ(t_k)` (left limits).
    pub theta: Vec<f64>,
    /// `Θⁿ(t_k)`.
    pub compensator: Vec<f64>,
    /// `𝒩ⁿ_i` for tagged `i`.
    pub tagged_counts: Vec<Vec<f64>>,
    /// `𝒩̄ⁿ`, the count over untagged particles.
    pub untagged_count: Vec<f64>,
    /// `ℳⁿ_i = 𝒩ⁿ_i - Θⁿ`.
    pub tagged_martingales: Vec<Vec<f64>>,
}

pub fn auxiliary_series(
    params: &MeanFieldParams,
    aux: &AuxiliarySystemPath,
    grid: &Grid,
) -> Result<AuxiliarySeries> {
    if grid.end() > params.horizon * (1.0 + 1e-12) {
        return Err(Error::OutOfRange { t: grid.end(), horizon: params.horizon });
    }
    let n = params.particles as f64;
    let feedback = aux.feedback_times();
    let (theta_bar, untagged_count, comp_bar) = sweep(&params.kernel, params.mu0, &feedback, grid);
    let compensator: Vec<f64> = comp_bar.iter().map(|v| v / n).collect();
    let mut tagged_counts = Vec::new();
    let mut tagged_martingales = Vec::new();
    for i in 0..aux.tagged {
        let times = aux.particle_times(i);
        let c: Vec<f64> = (0..grid.nodes())
            .map(|k| times.iter().take_while(|s| **s <= grid.node(k)).count() as f64)
            .collect();
        tagged_martingales.push(c.iter().zip(&compensator).map(|(a, b)| a - b).collect());
        tagged_counts.push(c);
    }
    Ok(AuxiliarySeries {
        grid: *grid,
        theta: theta_bar.iter().map(|v| v / n).collect(),
        compensator,
        tagged_counts,
        untagged_count,
        tagged_martingales,
    })
}

/// Result of [`simulate_coupled_auxiliary`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub main: ParticleSystemPath,
    pub auxiliary: AuxiliarySystemPath,
    /// Smallest `λ₀ⁿ(s) - θⁿ(s)` observed at proposal times.
    pub min_gap: f64,
}

/// Joint thinning of the main and auxiliary systems.
///
/// Proposals arrive at the total rate `max(λ̄, θ̄)(t⁺)` with a uniform particle
/// and a uniform mark `u`; the main system accepts when `u < λ̄(s)`, the
/// auxiliary one when `u < θ̄(s)`. Both read the same marks, which realizes a
/// shared Poisson random measure per particle.
pub fn simulate_coupled_auxiliary<R: Rng + ?Sized>(params: &MeanFieldParams, rng: &mut R) -> Result<CoupledPath> {
    if !params.kernel.is_nonincreasing() {
        return Err(Error::Unsupported("coupled thinning needs a nonincreasing kernel".into()));
    }
    let n = params.particles as u32;
    let k_tag = params.tagged as u32;
    let mut main = IntensityTracker::new(&params.kernel);
    let mut aux = IntensityTracker::new(&params.kernel);
    let (mut times, mut assignment) = (Vec::new(), Vec::new());
    let (mut aux_times, mut aux_particles) = (Vec::new(), Vec::new());
    let mut t = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut bound = params.mu0 + main.excitation(0).max(aux.excitation(0));
    while bound > 0.0 {
        let e: f64 = Exp1.sample(rng);
        let s = t + e / bound;
        if s > params.horizon {
            break;
        }
        if !(s > t) {
            continue;
        }
        main.advance(s);
        aux.advance(s);
        let lam = params.mu0 + main.excitation(0);
        let theta = params.mu0 + aux.excitation(0);
        min_gap = min_gap.min((lam - theta) / n as f64);
        let particle = rng.random_range(0..n);
        let u = rng.random::<f64>() * bound;
        if u < lam {
            main.add_event(0);
            times.push(s);
            assignment.push(particle);
        }
        if u < theta {
            aux_times.push(s);
            aux_particles.push(particle);
            if particle >= k_tag {
                aux.add_event(0);
            }
        }
        bound = params.mu0 + main.excitation(0).max(aux.excitation(0));
        t = s;
    }
    let aggregate = HawkesPath::from_events(1, params.horizon, times, vec![0; assignment.len()])?;
    Ok(CoupledPath {
        main: ParticleSystemPath {
            particles: params.particles,
            tagged: params.tagged,
            beta: params.beta,
            mu0: params.mu0,
            aggregate,
            assignment,
        },
        auxiliary: AuxiliarySystemPath { tagged: params.tagged, times: aux_times, particles: aux_particles },
        min_gap,
    })
}

/// Pathwise dominance report for a coupled path on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCheck {
    pub intensity_ok: bool,
    pub counts_ok: bool,
    pub min_gap: f64,
}

pub fn check_dominance(params: &MeanFieldParams, coupled: &CoupledPath, grid: &Grid) -> Result<DominanceCheck> {
    let main = mean_field_series(params, &coupled.main, grid)?;
    let aux = auxiliary_series(params, &coupled.auxiliary, grid)?;
    let tol = 1e-12;
    let node_gap = main
        .lambda0
        .iter()
        .zip(&aux.theta)
        .map(|(l, th)| l - th)
        .fold(f64::INFINITY, f64::min);
    let intensity_ok = node_gap >= -tol * main.lambda0.iter().cloned().fold(1.0, f64::max)
        && coupled.min_gap >= -tol * main.lambda0.iter().cloned().fold(1.0, f64::max);
    // 𝒩_i ≤ N_i for every particle at every event time
    let mut main_counts = vec![0u64; params.particles];
    let mut aux_counts = vec![0u64; params.particles];
    let (mt, mp) = (coupled.main.aggregate.times(), &coupled.main.assignment);
    let (at, ap) = (&coupled.auxiliary.times, &coupled.auxiliary.particles);
    let (mut i, mut j) = (0, 0);
    let mut counts_ok = true;
    while i < mt.len() || j < at.len() {
        let next_main = mt.get(i).copied().unwrap_or(f64::INFINITY);
        let next_aux = at.get(j).copied().unwrap_or(f64::INFINITY);
        let s = next_main.min(next_aux);
        while i < mt.len() && mt[i] == s {
            main_counts[mp[i] as usize] += 1;
            i += 1;
        }
        while j < at.len() && at[j] == s {
            aux_counts[ap[j] as usize] += 1;
            j += 1;
        }
        if aux_counts.iter().zip(&main_counts).any(|(a, m)| a > m) {
            counts_ok = false;
        }
    }
    Ok(DominanceCheck { intensity_ok, counts_ok, min_gap: node_gap.min(coupled.min_gap) })
}
