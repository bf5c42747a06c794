//! Residual bootstraps for the slope of a linear trend.
//!
//! Five schemes are available: Efron resampling of residuals, the wild
//! (independent weighted) bootstrap, the dependent wild bootstrap with AR(1)
//! or Bartlett-kernel Gaussian weights, and the circular moving-block
//! bootstrap. The dependence parameters can be chosen from the data:
//! [`politis_white_block_length`] for blocks and [`select_ar1_weight_param`]
//! for the AR(1) weight coefficient.

mod block_length;
mod bootstrap;
mod selection;
mod weights;

pub use block_length::politis_white_block_length;
pub use bootstrap::{
    bootstrap_trend, bootstrap_trend_masked, slope_significance, Ar1Weight, BlockLength,
    BootstrapConfig, BootstrapMethod, BootstrapResult, IidWeights, QUANTILE_LEVELS,
};
pub use selection::{
    ar1_weight_objective, default_r_grid, select_ar1_weight_param, ObjectivePoint,
};
pub use weights::{generate_weights, BandedCholesky, WeightProcess, WeightSampler};
