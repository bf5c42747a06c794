use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::{self, Stream};
use crate::series::{ar1_mean_variance, fit_ar1};
use crate::stats::sample_variance;
use crate::{Error, Result};

/// `0.05, 0.10, ..., 0.95`.
pub fn default_r_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// One point of the weight-parameter objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectivePoint {
    pub r: f64,
    /// Monte Carlo variance of the mean of `w * residuals` under AR(1) weights with coefficient `r`.
    pub bootstrap_variance: f64,
    /// Variance of the sample mean implied by the AR(1) fit to the residuals.
    pub target_variance: f64,
}

impl ObjectivePoint {
    pub fn objective(&self) -> f64 {
        (self.target_variance - self.bootstrap_variance).abs()
    }
}

/// Evaluates `|Var(mean | AR(1) fit) - Var*(mean of w r)|` on a grid of weight
/// coefficients. Non-finite residuals are missing; weights run over the full
/// time index so gaps do not shorten the dependence.
///
/// All candidates share the same innovation draws, so differences between
/// grid points are not blurred by independent Monte Carlo noise.
pub fn ar1_weight_objective(
    residuals: &[f64],
    grid: &[f64],
    inner_replicates: usize,
    seed: u64,
) -> Result<Vec<ObjectivePoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty candidate grid".into()));
    }
    if let Some(r) = grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::InvalidArgument(format!("candidate {r} outside (0, 1)")));
    }
    if inner_replicates < 2 {
        return Err(Error::InvalidArgument("need at least 2 inner replicates".into()));
    }
    let present: Vec<f64> = residuals.iter().copied().filter(|x| x.is_finite()).collect();
    if present.len() < 100 {
        return Err(Error::InsufficientData {
            needed: 100,
            got: present.len(),
        });
    }
    let fit = fit_ar1(residuals)?;
    let m = present.len();
    let target = ar1_mean_variance(fit.r, sample_variance(&present), m);

    let n = residuals.len();
    let innovations: Vec<f64> = grid.iter().map(|r| (1.0 - r * r).sqrt()).collect();
    // means[j][c]: mean of w * residuals for replicate j and candidate c
    let means: Vec<Vec<f64>> = (0..inner_replicates)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(seed, Stream::Selection, j as u64);
            let eta: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            grid.iter()
                .zip(&innovations)
                .map(|(&r, &s)| {
                    let mut w = eta[0];
                    let mut total = 0.0;
                    for (t, e) in residuals.iter().enumerate() {
                        if t > 0 {
                            w = r * w + s * eta[t];
                        }
                        if e.is_finite() {
                            total += w * e;
                        }
                    }
                    total / m as f64
                })
                .collect()
        })
        .collect();

    Ok(grid
        .iter()
        .enumerate()
        .map(|(c, &r)| {
            let column: Vec<f64> = means.iter().map(|row| row[c]).collect();
            ObjectivePoint {
                r,
                bootstrap_variance: sample_variance(&column),
                target_variance: target,
            }
        })
        .collect())
}

/// Picks the AR(1) weight coefficient whose bootstrap variance of the mean is
/// closest to the variance implied by an AR(1) fit of the residuals.
pub fn select_ar1_weight_param(
    residuals: &[f64],
    grid: &[f64],
    inner_replicates: usize,
    seed: u64,
) -> Result<f64> {
    let curve = ar1_weight_objective(residuals, grid, inner_replicates, seed)?;
    Ok(curve
        .iter()
        .min_by(|a, b| a.objective().total_cmp(&b.objective()))
        .map(|p| p.r)
        .expect("grid is non-empty"))
}
