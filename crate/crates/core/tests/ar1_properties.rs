use statrs::distribution::{ContinuousCDF, Normal};
use warmtrend_core::{ar1_mean_variance, fit_ar1, simulate_ar1_trend};

#[test]
fn fit_recovers_coefficient_within_three_asymptotic_sd() {
    let n = 5000usize;
    for &r in &[0.0, 0.3, 0.6, 0.812, 0.95] {
        let bound = 3.0 * ((1.0 - r * r) / n as f64).sqrt();
        let trials = 200u64;
        let hits = (0..trials)
            .filter(|&seed| {
                let x = simulate_ar1_trend(n, 0.0, r, 1.0, 1_000 * seed + 17);
                (fit_ar1(&x).unwrap().r - r).abs() <= bound
            })
            .count();
        assert!(hits as f64 >= 0.99 * trials as f64, "r = {r}: {hits}/{trials}");
    }
}

#[test]
fn reference_length_estimates() {
    for seed in 0..10 {
        let x = simulate_ar1_trend(23360, 0.0, 0.812, 1.0, seed);
        assert!((fit_ar1(&x).unwrap().r - 0.812).abs() < 0.02);
        let w = simulate_ar1_trend(10000, 0.0, 0.0, 1.0, seed);
        assert!(fit_ar1(&w).unwrap().r.abs() < 0.03);
    }
}

#[test]
fn white_simulation_passes_ks_against_standard_normal() {
    let mut x = simulate_ar1_trend(5000, 0.0, 0.0, 1.0, 99);
    x.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = normal.cdf(*v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic
    assert!(d < 1.628 / n.sqrt(), "D = {d}");
}

#[test]
fn mean_variance_is_increasing_in_r() {
    for &n in &[2usize, 10, 365, 23360] {
        let mut prev = ar1_mean_variance(0.0, 2.0, n);
        assert_eq!(prev, 2.0 / n as f64);
        for i in 1..100 {
            let v = ar1_mean_variance(i as f64 / 100.0, 2.0, n);
            assert!(v > prev, "n = {n}, r = {}", i as f64 / 100.0);
            prev = v;
        }
    }
}
