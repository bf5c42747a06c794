//! Shared inputs for the criterion benches.

use warmtrend_core::simulate_ar1_trend;

/// Length of a 64-year daily record.
pub const DAILY_N: usize = 23360;

/// Trending AR(1) series of the reference length.
pub fn reference_series(seed: u64) -> Vec<f64> {
    simulate_ar1_trend(DAILY_N, 8.6e-5, 0.812, 1.0, seed)
}

/// `per_cluster` points around each of three well-separated centres in `d` dimensions.
pub fn clustered_points(per_cluster: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let noise = simulate_ar1_trend(3 * per_cluster * d, 0.0, 0.0, 1.0, seed);
    noise
        .chunks(d)
        .enumerate()
        .map(|(i, z)| {
            let c = (i / per_cluster) as f64;
            z.iter().enumerate().map(|(j, e)| e + if j % 3 == i / per_cluster { 8.0 * c + 8.0 } else { 0.0 }).collect()
        })
        .collect()
}
