//! Monte Carlo and closed-form oracles, independent of the code under test.

use hawkes_scaling::hawkes::{compensator_martingale, simulate_cluster, simulate_thinning, HawkesParams};
use hawkes_scaling::kernel::CMatrix;
use hawkes_scaling::meanfield::{simulate_particles, MeanFieldParams};
use hawkes_scaling::resolvent::{fourier_limit_setting1, resolvent_grid};
use hawkes_scaling::rng::{ensemble, StreamFactory};
use hawkes_scaling::stats::{
    binomial_chi_square, holder_exponent, ks_poisson, ks_two_sample, mean_estimate, wasserstein1_distance,
};
use hawkes_scaling::{Grid, Kernel};
use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn streams(label: &str) -> StreamFactory {
    StreamFactory::new(20_261_016).domain(label)
}

#[test]
fn power_law_resolvent_matches_neumann_series() {
    // ψ = Σ φ^{*k} by trapezoid convolutions on a finer grid
    let (norm, exponent, cutoff): (f64, f64, f64) = (0.6, 0.8, 0.4);
    let phi = |t: f64| norm * exponent * cutoff.powf(exponent) * (cutoff + t).powf(-1.0 - exponent);
    let (horizon, fine) = (2.0, 4000usize);
    let dt = horizon / fine as f64;
    let base: Vec<f64> = (0..=fine).map(|k| phi(k as f64 * dt)).collect();
    let mut term = base.clone();
    let mut psi = base.clone();
    for _ in 0..60 {
        let next: Vec<f64> = (0..=fine)
            .map(|k| {
                if k == 0 {
                    return 0.0;
                }
                let inner: f64 = (1..k).map(|j| term[j] * base[k - j]).sum();
                dt * (inner + 0.5 * (term[0] * base[k] + term[k] * base[0]))
            })
            .collect();
        psi.iter_mut().zip(&next).for_each(|(p, n)| *p += n);
        term = next;
    }
    let kernel = Kernel::power_law_normalized(norm, exponent, cutoff).unwrap();
    let grid = Grid::new(horizon, 1e-3).unwrap();
    let table = resolvent_grid(&kernel, &grid).unwrap();
    for t in [0.1005, 0.5005, 1.0005, 1.9995] {
        let cell = (t / grid.step()) as usize;
        let oracle = psi[(t / dt).round() as usize];
        let got = table.psi_entry(cell, 0, 0);
        assert!((got - oracle).abs() <= 2e-3 * oracle, "t={t}: {got} vs {oracle}");
    }
}

#[test]
fn zero_kernel_gives_poisson_counts() {
    let params = HawkesParams::univariate(3.0, Kernel::zero(1), 2.0).unwrap();
    let counts: Vec<u64> = ensemble(&streams("poisson"), 4000, |_, rng| {
        simulate_thinning(&params, rng).unwrap().total() as u64
    });
    let report = ks_poisson(&counts, 6.0, 0.01).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn expected_count_matches_resolvent_formula() {
    // Exp(1, 2) has ψ(t) = e^{-t}, so E N(1) = ∫_0^1 (2 - e^{-t}) dt = 1 + e^{-1}
    let params = HawkesParams::univariate(1.0, Kernel::exponential_scalar(1.0, 2.0).unwrap(), 1.0).unwrap();
    let counts: Vec<f64> = ensemble(&streams("mean-count"), 20_000, |_, rng| {
        simulate_thinning(&params, rng).unwrap().total() as f64
    });
    let est = mean_estimate(&counts).unwrap();
    assert!(est.within(1.0 + (-1.0f64).exp(), 4.0), "{est:?}");
}

#[test]
fn martingale_has_mean_zero() {
    let kernel = Kernel::power_law_normalized(0.7, 0.75, 1.0).unwrap();
    let params = HawkesParams::univariate(2.0, kernel, 3.0).unwrap();
    let grid = Grid::new(3.0, 0.5).unwrap();
    let terminal: Vec<f64> = ensemble(&streams("martingale"), 5000, |_, rng| {
        let path = simulate_thinning(&params, rng).unwrap();
        *compensator_martingale(&params, &path, &grid).unwrap().martingale.last().unwrap()
    });
    let est = mean_estimate(&terminal).unwrap();
    assert!(est.within(0.0, 4.0), "{est:?}");
}

#[test]
fn thinning_and_cluster_agree_for_a_bivariate_kernel() {
    let alpha = nalgebra::dmatrix![0.8, 0.3; 0.2, 0.6];
    let beta = nalgebra::dmatrix![2.0, 1.5; 1.0, 2.5];
    let kernel = Kernel::exponential(alpha, beta).unwrap();
    let params = HawkesParams::new(nalgebra::dvector![0.5, 1.0], kernel, 4.0).unwrap();
    let first = |f: fn(&HawkesParams, &mut hawkes_scaling::rng::PathRng) -> hawkes_scaling::Result<hawkes_scaling::hawkes::HawkesPath>,
                 label: &str| {
        ensemble(&streams(label), 3000, |_, rng| f(&params, rng).unwrap().counts_at(4.0)[0] as f64)
    };
    let a = first(simulate_thinning, "thin");
    let b = first(simulate_cluster, "cluster");
    let report = ks_two_sample(&a, &b, 0.001).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn single_particle_system_is_a_hawkes_process() {
    let kernel = Kernel::exponential_scalar(1.5, 3.0).unwrap();
    let mf = MeanFieldParams::new(1, 2.0, kernel.clone(), 1, 2.0, 0.5).unwrap();
    let hp = HawkesParams::univariate(2.0, kernel, 2.0).unwrap();
    let a: Vec<f64> = ensemble(&streams("mf-one"), 3000, |_, rng| {
        simulate_particles(&mf, rng).unwrap().particle_counts_at(2.0)[0] as f64
    });
    let b: Vec<f64> = ensemble(&streams("hawkes-one"), 3000, |_, rng| {
        simulate_thinning(&hp, rng).unwrap().total() as f64
    });
    let report = ks_two_sample(&a, &b, 0.001).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn tagged_counts_are_binomial_given_the_total() {
    let kernel = Kernel::exponential_scalar(4.0, 5.0).unwrap();
    let mf = MeanFieldParams::new(8, 6.0, kernel, 2, 1.0, 0.3).unwrap();
    let pairs: Vec<(u64, u64)> = ensemble(&streams("binomial"), 3000, |_, rng| {
        let path = simulate_particles(&mf, rng).unwrap();
        let counts = path.particle_counts_at(1.0);
        (counts.iter().sum(), counts[0])
    });
    let report = binomial_chi_square(&pairs, 1.0 / 8.0, 0.001).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn ks_test_holds_its_level_under_the_null() {
    let reps = 400;
    let rejections = (0..reps)
        .filter(|&r| {
            let mut rng = streams("ks-null").stream(r);
            let a: Vec<f64> = (0..200).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..300).map(|_| rng.random()).collect();
            !ks_two_sample(&a, &b, 0.05).unwrap().pass
        })
        .count();
    // Binomial(400, 0.05) has mean 20 and sd 4.4; the asymptotic p-value is conservative
    assert!(rejections <= 35, "{rejections} rejections");
}

#[test]
fn wasserstein_distance_of_shifted_uniforms() {
    let mut rng = streams("w1").stream(0);
    let a: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
    let b: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>() + 0.3).collect();
    let d = wasserstein1_distance(&a, &b).unwrap();
    assert!((d - 0.3).abs() < 0.01, "{d}");
}

#[test]
fn brownian_paths_are_half_holder() {
    let mut rng = streams("holder").stream(0);
    let mut w = vec![0.0];
    let step = (1.0f64 / 16_384.0).sqrt();
    for _ in 0..16_384 {
        let g: f64 = StandardNormal.sample(&mut rng);
        w.push(w.last().unwrap() + step * g);
    }
    let h = holder_exponent(&w).unwrap();
    assert!((h.exponent - 0.5).abs() < 0.05, "{h:?}");
}

#[test]
fn setting_one_deviation_is_order_beta() {
    // with F_φ = I - βB the deviation from B^{-1} is exactly β times the norm of I
    let b = CMatrix::from_row_slice(2, 2, &[
        Complex::new(2.0, 0.5), Complex::new(0.3, 0.0),
        Complex::new(-0.2, 0.1), Complex::new(1.5, -1.0),
    ]);
    let betas = [0.1, 0.01, 0.001];
    let report = fourier_limit_setting1(&b, &betas).unwrap();
    assert!(report.deviations_decrease());
    for term in &report.terms {
        let ratio = term.deviation.unwrap() / term.beta_n;
        assert!((ratio - 1.0).abs() < 1e-9, "{ratio}");
    }
}
