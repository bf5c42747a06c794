use rand::Rng;
use rayon::prelude::*;

use super::block_length::politis_white_block_length;
use super::selection::{default_r_grid, select_ar1_weight_param};
use super::weights::{WeightProcess, WeightSampler};
use crate::rng::{self, Stream};
use crate::stats::quantiles;
use crate::trend::{OlsDesign, TrendFit};
use crate::{Error, Result};

/// Probability levels reported for every bootstrap distribution.
pub const QUANTILE_LEVELS: [f64; 7] = [0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IidWeights {
    Rademacher,
    Normal,
}

/// Coefficient of the AR(1) weight process.
#[derive(Debug, Clone, PartialEq)]
pub enum Ar1Weight {
    Fixed(f64),
    /// Chosen by [`select_ar1_weight_param`] on the fitted residuals.
    Selected {
        grid: Vec<f64>,
        inner_replicates: usize,
    },
}

impl Ar1Weight {
    pub fn selected() -> Self {
        Ar1Weight::Selected {
            grid: default_r_grid(),
            inner_replicates: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockLength {
    Fixed(usize),
    /// Politis-White rule on the fitted residuals.
    Auto,
}

/// Resampling scheme for the regression errors.
#[derive(Debug, Clone, PartialEq)]
pub enum BootstrapMethod {
    /// i.i.d. draws from the residuals.
    Efron,
    /// Residuals times independent weights.
    Wild(IidWeights),
    /// Residuals times AR(1) weights.
    DepWildAr1(Ar1Weight),
    /// Residuals times Gaussian weights with Bartlett covariance.
    DepWildKernel { bandwidth: usize },
    /// Circular moving blocks of residuals.
    MovingBlock(BlockLength),
}

impl BootstrapMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BootstrapMethod::Efron => "efron",
            BootstrapMethod::Wild(_) => "wild",
            BootstrapMethod::DepWildAr1(_) => "dep_wild_ar1",
            BootstrapMethod::DepWildKernel { .. } => "dep_wild_kernel",
            BootstrapMethod::MovingBlock(_) => "moving_block",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BootstrapMethod::DepWildAr1(Ar1Weight::Fixed(r)) => WeightProcess::Ar1 { r: *r }.validate(),
            BootstrapMethod::DepWildAr1(Ar1Weight::Selected { grid, inner_replicates }) => {
                if grid.is_empty() || *inner_replicates < 2 {
                    Err(Error::InvalidArgument("weight selection needs a grid and 2+ inner replicates".into()))
                } else {
                    Ok(())
                }
            }
            BootstrapMethod::DepWildKernel { bandwidth } => {
                WeightProcess::KernelMvn { bandwidth: *bandwidth }.validate()
            }
            BootstrapMethod::MovingBlock(BlockLength::Fixed(0)) => {
                Err(Error::InvalidArgument("block length must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub method: BootstrapMethod,
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(method: BootstrapMethod, replicates: usize, seed: u64) -> Self {
        Self {
            method,
            replicates,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be positive".into()));
        }
        self.method.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub method: &'static str,
    pub point_estimate: f64,
    pub slope_replicates: Vec<f64>,
    /// `(level, value)` at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
    /// AR(1) weight coefficient actually used, for `dep_wild_ar1`.
    pub weight_r: Option<f64>,
    /// Block length actually used, for `moving_block`.
    pub block_length: Option<usize>,
}

impl BootstrapResult {
    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|(l, _)| (l - level).abs() < 1e-12)
            .map(|&(_, v)| v)
    }

    /// Width of the central interval between `lower` and `upper` levels.
    pub fn width(&self, lower: f64, upper: f64) -> Option<f64> {
        Some(self.quantile(upper)? - self.quantile(lower)?)
    }
}

/// Fraction of bootstrap slopes that are `<= 0`: a one-sided p-value for a
/// positive trend.
pub fn slope_significance(result: &BootstrapResult) -> f64 {
    let reps = &result.slope_replicates;
    reps.iter().filter(|&&s| s <= 0.0).count() as f64 / reps.len() as f64
}

/// Residual bootstrap of the trend slope of a complete series.
pub fn bootstrap_trend(values: &[f64], config: &BootstrapConfig) -> Result<BootstrapResult> {
    bootstrap_trend_masked(values, None, config)
}

/// Residual bootstrap of the trend slope; `missing` marks absent entries.
///
/// Every replicate is `fitted_t + e*_t` on the observed positions and is
/// refitted by OLS. Replicate `i` draws from its own substream of `config.seed`.
pub fn bootstrap_trend_masked(
    values: &[f64],
    missing: Option<&[bool]>,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    config.validate()?;
    let design = OlsDesign::new(values.len(), missing)?;
    let fit = design.fit(values);
    let engine = Engine::prepare(&design, &fit, &config.method, config.seed)?;

    let slope_replicates: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map_init(
            || Buffers::new(values.len()),
            |buf, i| engine.replicate(&design, &fit, config.seed, i as u64, buf),
        )
        .collect();
    if let Some(bad) = slope_replicates.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("replicate {bad} produced a non-finite slope")));
    }
    let q = quantiles(&slope_replicates, &QUANTILE_LEVELS);
    Ok(BootstrapResult {
        method: config.method.name(),
        point_estimate: fit.slope_a,
        slope_replicates,
        quantiles: QUANTILE_LEVELS.iter().copied().zip(q).collect(),
        weight_r: engine.weight_r,
        block_length: engine.block_length,
    })
}

struct Buffers {
    y: Vec<f64>,
    w: Vec<f64>,
    scratch: Vec<f64>,
}

impl Buffers {
    fn new(n: usize) -> Self {
        Self {
            y: vec![0.0; n],
            w: vec![0.0; n],
            scratch: Vec::new(),
        }
    }
}

enum Kind {
    Efron,
    Weighted(WeightSampler),
    Block(usize),
}

struct Engine {
    kind: Kind,
    /// Positions of observed entries, in time order.
    positions: Vec<usize>,
    /// Residuals at `positions`.
    compact: Vec<f64>,
    weight_r: Option<f64>,
    block_length: Option<usize>,
}

impl Engine {
    fn prepare(design: &OlsDesign, fit: &TrendFit, method: &BootstrapMethod, seed: u64) -> Result<Self> {
        let n = design.len();
        let positions: Vec<usize> = (0..n).filter(|&i| design.is_present(i)).collect();
        let compact: Vec<f64> = positions.iter().map(|&i| fit.residuals[i]).collect();
        let mut weight_r = None;
        let mut block_length = None;
        let kind = match method {
            BootstrapMethod::Efron => Kind::Efron,
            BootstrapMethod::Wild(IidWeights::Rademacher) => {
                Kind::Weighted(WeightSampler::new(WeightProcess::IidRademacher, n)?)
            }
            BootstrapMethod::Wild(IidWeights::Normal) => {
                Kind::Weighted(WeightSampler::new(WeightProcess::IidNormal, n)?)
            }
            BootstrapMethod::DepWildAr1(choice) => {
                let r = match choice {
                    Ar1Weight::Fixed(r) => *r,
                    Ar1Weight::Selected { grid, inner_replicates } => select_ar1_weight_param(
                        &fit.residuals,
                        grid,
                        *inner_replicates,
                        rng::derive_seed(seed, Stream::Selection, u64::MAX),
                    )?,
                };
                weight_r = Some(r);
                Kind::Weighted(WeightSampler::new(WeightProcess::Ar1 { r }, n)?)
            }
            BootstrapMethod::DepWildKernel { bandwidth } => Kind::Weighted(WeightSampler::new(
                WeightProcess::KernelMvn { bandwidth: *bandwidth },
                n,
            )?),
            BootstrapMethod::MovingBlock(choice) => {
                let b = match choice {
                    BlockLength::Fixed(b) => *b,
                    BlockLength::Auto => politis_white_block_length(&compact),
                }
                .min(compact.len());
                block_length = Some(b);
                Kind::Block(b)
            }
        };
        Ok(Self {
            kind,
            positions,
            compact,
            weight_r,
            block_length,
        })
    }

    fn replicate(&self, design: &OlsDesign, fit: &TrendFit, seed: u64, index: u64, buf: &mut Buffers) -> f64 {
        let fitted = |i: usize| fit.intercept_b + fit.slope_a * (i + 1) as f64;
        let m = self.compact.len();
        match &self.kind {
            Kind::Efron => {
                let mut rng = rng::stream(seed, Stream::Resample, index);
                for &i in &self.positions {
                    buf.y[i] = fitted(i) + self.compact[rng.gen_range(0..m)];
                }
            }
            Kind::Weighted(sampler) => {
                let mut rng = rng::stream(seed, Stream::Weights, index);
                sampler.fill(&mut rng, &mut buf.w, &mut buf.scratch);
                for &i in &self.positions {
                    buf.y[i] = fitted(i) + buf.w[i] * fit.residuals[i];
                }
            }
            Kind::Block(b) => {
                let mut rng = rng::stream(seed, Stream::BlockStarts, index);
                let mut filled = 0;
                while filled < m {
                    let start = rng.gen_range(0..m);
                    for j in 0..(*b).min(m - filled) {
                        let i = self.positions[filled + j];
                        buf.y[i] = fitted(i) + self.compact[(start + j) % m];
                    }
                    filled += b;
                }
            }
        }
        design.slope(&buf.y)
    }
}
