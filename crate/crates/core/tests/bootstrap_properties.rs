use warmtrend_core::resampling::IidWeights;
use warmtrend_core::rng::{derive_seed, Stream};
use warmtrend_core::stats::quantiles;
use warmtrend_core::{
    bootstrap_trend, politis_white_block_length, simulate_ar1_trend, BootstrapConfig, BootstrapMethod,
};

#[test]
fn wild_interval_coverage_is_nominal() {
    let n = 100;
    let trials = 500;
    let covered = (0..trials)
        .filter(|&i| {
            let seed = derive_seed(42, Stream::Simulation, i);
            let y = simulate_ar1_trend(n, 1.0, 0.0, 1.0, seed);
            let config = BootstrapConfig::new(BootstrapMethod::Wild(IidWeights::Rademacher), 2000, seed);
            let res = bootstrap_trend(&y, &config).unwrap();
            let (lo, hi) = (res.quantile(0.025).unwrap(), res.quantile(0.975).unwrap());
            lo <= 1.0 && 1.0 <= hi
        })
        .count();
    let rate = covered as f64 / trials as f64;
    assert!((rate - 0.95).abs() <= 0.03, "coverage {rate}");
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    quantiles(&xs, &[0.5])[0]
}

#[test]
fn white_noise_block_length_is_minimal() {
    let short = (0..100)
        .filter(|&s| politis_white_block_length(&simulate_ar1_trend(10000, 0.0, 0.0, 1.0, s)) <= 5)
        .count();
    assert!(short >= 90, "{short}/100");
}

#[test]
fn dependence_lengthens_median_block() {
    let med = |r: f64| {
        median((0..100).map(|s| politis_white_block_length(&simulate_ar1_trend(10000, 0.0, r, 1.0, s)) as f64).collect())
    };
    assert!(med(0.9) > med(0.0));
}

#[test]
fn reference_block_length_is_in_band_and_stable() {
    let bs: Vec<f64> = (0..20)
        .map(|s| politis_white_block_length(&simulate_ar1_trend(23360, 0.0, 0.812, 1.0, s)) as f64)
        .collect();
    let m = median(bs.clone());
    for b in &bs {
        assert!((30.0..=300.0).contains(b), "b = {b}");
        assert!((b - m).abs() <= 0.3 * m, "b = {b}, median {m}");
    }
}
