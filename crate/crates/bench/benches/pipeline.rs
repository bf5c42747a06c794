use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use warmtrend_bench::{clustered_points, reference_series, DAILY_N};
use warmtrend_core::resampling::default_r_grid;
use warmtrend_core::{
    bootstrap_trend, em_fit, fit_ols_trend, generate_weights, politis_white_block_length, select_ar1_weight_param,
    BlockLength, BootstrapConfig, BootstrapMethod, CovarianceFamily, EmOptions, WeightProcess,
};

fn trend(c: &mut Criterion) {
    let y = reference_series(1);
    c.bench_function("ols_trend/23360", |b| b.iter(|| fit_ols_trend(black_box(&y), None).unwrap()));
}

fn weights(c: &mut Criterion) {
    let mut group = c.benchmark_group("weights");
    for (name, process) in [
        ("rademacher", WeightProcess::IidRademacher),
        ("ar1", WeightProcess::Ar1 { r: 0.9 }),
        ("kernel_mvn_25", WeightProcess::KernelMvn { bandwidth: 25 }),
    ] {
        group.bench_with_input(BenchmarkId::new(name, DAILY_N), &process, |b, p| {
            b.iter(|| generate_weights(*p, DAILY_N, 3).unwrap())
        });
    }
    group.finish();
}

fn resampling(c: &mut Criterion) {
    let y = reference_series(2);
    let residuals = fit_ols_trend(&y, None).unwrap().residuals;
    c.bench_function("politis_white/23360", |b| b.iter(|| politis_white_block_length(black_box(&residuals))));

    let mut group = c.benchmark_group("bootstrap_100");
    group.sample_size(10);
    for (name, method) in [
        ("wild", BootstrapMethod::Wild(warmtrend_core::resampling::IidWeights::Rademacher)),
        ("dep_wild_ar1_fixed", BootstrapMethod::DepWildAr1(warmtrend_core::resampling::Ar1Weight::Fixed(0.9))),
        ("moving_block_auto", BootstrapMethod::MovingBlock(BlockLength::Auto)),
    ] {
        let config = BootstrapConfig::new(method, 100, 4);
        group.bench_function(name, |b| b.iter(|| bootstrap_trend(&y, &config).unwrap()));
    }
    group.bench_function("ar1_weight_selection_200", |b| {
        let grid = default_r_grid();
        b.iter(|| select_ar1_weight_param(&residuals, &grid, 200, 5).unwrap())
    });
    group.finish();
}

fn clustering(c: &mut Criterion) {
    let points = clustered_points(200, 30, 6);
    let mut group = c.benchmark_group("em_600x30_k3");
    group.sample_size(10);
    for family in [CovarianceFamily::EII, CovarianceFamily::VEV, CovarianceFamily::VVV] {
        group.bench_function(family.code(), |b| {
            b.iter(|| em_fit(&points, 3, family, 7, &EmOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trend, weights, resampling, clustering);
criterion_main!(benches);
