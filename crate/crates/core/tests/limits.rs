use hawkes_scaling::kernel::{BernsteinTriplet, LevyMeasure};
use hawkes_scaling::limits::{
    limit_empirical_law, sample_regime_limit, solve_cir, solve_sve, CirParams, FractionalNormalization, LimitKernelSpec,
    Regime,
};
use hawkes_scaling::meanfield::{check_dominance, simulate_coupled_auxiliary, MeanFieldParams};
use hawkes_scaling::rng::{ensemble, StreamFactory};
use hawkes_scaling::stats::{mean_estimate, variance_estimate};
use hawkes_scaling::{Grid, Kernel};

fn streams(label: &str) -> StreamFactory {
    StreamFactory::new(77).domain(label)
}

#[test]
fn cir_moments_match_closed_forms() {
    let p = CirParams::new(2.0, 0.5, 0.8, 0.3).unwrap();
    let grid = Grid::new(1.0, 1e-3).unwrap();
    let xs: Vec<f64> = ensemble(&streams("cir"), 8000, |_, rng| *solve_cir(&p, &grid, rng).unwrap().values.last().unwrap());
    let (m, v) = (mean_estimate(&xs).unwrap(), variance_estimate(&xs).unwrap());
    assert!(m.within(p.mean(1.0), 4.0), "{m:?} vs {}", p.mean(1.0));
    assert!(v.within(p.variance(1.0), 4.0), "{v:?} vs {}", p.variance(1.0));
}

#[test]
fn sve_mean_follows_the_limit_measure() {
    let grid = Grid::new(1.0, 0.01).unwrap();
    let triplet = BernsteinTriplet::new(1.0, 0.0, LevyMeasure::stable_with_symbol(1.0, 0.7).unwrap()).unwrap();
    for spec in [
        LimitKernelSpec::from_triplet(&triplet, &grid).unwrap(),
        LimitKernelSpec::fractional(0.8, FractionalNormalization::GammaAlpha, &grid).unwrap(),
    ] {
        let ys: Vec<(f64, f64)> = ensemble(&streams("sve"), 4000, |_, rng| {
            let p = solve_sve(&spec, &[1.5], rng).unwrap();
            (p.y_raw[50], p.y_raw[100])
        });
        for (k, pick) in [(50, 0), (100, 1)] {
            let sample: Vec<f64> = ys.iter().map(|y| if pick == 0 { y.0 } else { y.1 }).collect();
            let est = mean_estimate(&sample).unwrap();
            assert!(est.within(spec.cdf_node(k)[0] * 1.5, 4.0), "node {k}: {est:?}");
        }
    }
}

#[test]
fn zero_regime_law_is_gaussian_with_variance_xbar() {
    let mut rng = streams("zero").stream(0);
    let snap = limit_empirical_law(Regime::Zero, 1.0, 2.5, 40_000, &mut rng).unwrap();
    let z = snap.z_values();
    assert!(mean_estimate(&z).unwrap().within(0.0, 4.0));
    assert!(variance_estimate(&z).unwrap().within(2.5, 4.0));
    assert!(snap.x_values().iter().all(|x| *x == 2.5));
}

#[test]
fn finite_regime_law_is_compensated_poisson() {
    let (zeta, xbar) = (0.4, 2.0);
    let mut rng = streams("finite").stream(0);
    let snap = limit_empirical_law(Regime::Finite(zeta), 1.0, xbar, 40_000, &mut rng).unwrap();
    let x = snap.x_values();
    assert!(mean_estimate(&x).unwrap().within(xbar, 4.0));
    assert!(variance_estimate(&x).unwrap().within(zeta * xbar, 4.0));
    for v in &x {
        let c = v / zeta;
        assert!((c - c.round()).abs() < 1e-9);
    }
}

#[test]
fn infinite_regime_is_degenerate_and_zero_regime_tracks_the_driver() {
    let mut rng = streams("regimes").stream(0);
    let snap = limit_empirical_law(Regime::Infinite, 1.0, 3.0, 10, &mut rng).unwrap();
    assert_eq!(snap.x_values(), vec![0.0]);
    let grid = Grid::new(1.0, 0.1).unwrap();
    let xbar: Vec<f64> = (0..grid.nodes()).map(|k| grid.node(k).powi(2)).collect();
    let s = sample_regime_limit(Regime::Zero, &grid, &xbar, 2, &mut rng).unwrap();
    assert!(s.x.iter().all(|x| *x == xbar));
    assert!(sample_regime_limit(Regime::Finite(-1.0), &grid, &xbar, 2, &mut rng).is_err());
}

#[test]
fn coupled_main_system_keeps_its_mean() {
    // Exp(2, 4) has ψ(t) = 2 e^{-2t}, so E N̄(1) = μ₀ (2 - (1 - e^{-2}) / 2)
    let mu0 = 3.0;
    let params = MeanFieldParams::new(30, mu0, Kernel::exponential_scalar(2.0, 4.0).unwrap(), 4, 1.0, 0.2).unwrap();
    let grid = Grid::new(1.0, 0.01).unwrap();
    let runs: Vec<(f64, bool)> = ensemble(&streams("coupled"), 6000, |_, rng| {
        let c = simulate_coupled_auxiliary(&params, rng).unwrap();
        let d = check_dominance(&params, &c, &grid).unwrap();
        (c.main.aggregate.total() as f64, d.intensity_ok && d.counts_ok)
    });
    assert!(runs.iter().all(|r| r.1));
    let totals: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let target = mu0 * (2.0 - (1.0 - (-2.0f64).exp()) / 2.0);
    let est = mean_estimate(&totals).unwrap();
    assert!(est.within(target, 4.0), "{est:?} vs {target}");
}
