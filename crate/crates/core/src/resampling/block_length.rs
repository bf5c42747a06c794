use crate::stats::mean;

/// Flat-top (trapezoidal) lag window.
fn flat_top(s: f64) -> f64 {
    let s = s.abs();
    if s <= 0.5 {
        1.0
    } else if s <= 1.0 {
        2.0 * (1.0 - s)
    } else {
        0.0
    }
}

/// Automatic block length for the circular block bootstrap (Politis-White rule).
///
/// The bandwidth `m` is the smallest lag after which `K_N = max(5, ceil(sqrt(log10 n)))`
/// consecutive sample autocorrelations stay below `2 sqrt(log10(n) / n)` in
/// magnitude. Spectral quantities are flat-top weighted sums over lags up to
/// `2m`; the result is `ceil((2 G^2 / D)^(1/3) n^(1/3))` with `D = 4/3 g(0)^2`,
/// clamped to `[1, ceil(3 sqrt(n))]`. Non-finite entries are dropped first.
pub fn politis_white_block_length(series: &[f64]) -> usize {
    let xs: Vec<f64> = series.iter().copied().filter(|x| x.is_finite()).collect();
    let n = xs.len();
    let upper = ((3.0 * (n as f64).sqrt()).ceil() as usize).max(1);
    if n < 4 {
        return 1;
    }
    let nf = n as f64;
    let log_n = nf.log10();
    let k_n = ((log_n.sqrt()).ceil() as usize).max(5);
    let threshold = 2.0 * (log_n / nf).sqrt();
    let m_max = (nf.sqrt().ceil() as usize + k_n).min(n - 1);
    let max_lag = (2 * m_max).max(m_max + k_n).min(n - 1);

    let mu = mean(&xs);
    let centred: Vec<f64> = xs.iter().map(|x| x - mu).collect();
    let acov: Vec<f64> = (0..=max_lag)
        .map(|k| {
            centred[..n - k]
                .iter()
                .zip(&centred[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / nf
        })
        .collect();
    if acov[0] <= 0.0 {
        return 1;
    }
    let rho: Vec<f64> = acov.iter().map(|c| c / acov[0]).collect();

    let insignificant = |k: usize| k > max_lag || rho[k].abs() < threshold;
    let m = (0..=m_max)
        .find(|&m| (1..=k_n).all(|j| insignificant(m + j)))
        .unwrap_or(m_max);

    let big_m = (2 * m).min(max_lag);
    let (mut g0, mut g1) = (acov[0], 0.0);
    for (k, &c) in acov.iter().enumerate().take(big_m + 1).skip(1) {
        let w = flat_top(k as f64 / big_m as f64);
        g0 += 2.0 * w * c;
        g1 += 2.0 * w * k as f64 * c;
    }
    let d = 4.0 / 3.0 * g0 * g0;
    if !(d > 0.0) || g0 <= 0.0 {
        return 1;
    }
    let b = ((2.0 * g1 * g1 / d).cbrt() * nf.cbrt()).ceil();
    if !b.is_finite() {
        return upper;
    }
    (b as usize).clamp(1, upper)
}
