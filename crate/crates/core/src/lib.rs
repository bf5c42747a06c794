//! Trend inference for serially dependent daily series.
//!
//! The crate covers the whole chain used to assess warming trends on a grid of
//! daily temperature series:
//!
//! * [`series`]: daily containers, seasonal standardization, NAO adjustment and AR(1) tools.
//! * [`trend`]: OLS trend fits and sliding start-year coefficient curves.
//! * [`resampling`]: Efron, wild, dependent wild (AR(1) and Bartlett-kernel weights)
//!   and circular moving-block bootstraps, with automatic parameter selection.
//! * [`clustering`]: k-means and Gaussian mixture EM with BIC model selection.
//! * [`grid`]: gridded ingestion, per-cell analysis and result export.
//! * [`simulation`]: seeded Monte Carlo experiments comparing the bootstrap schemes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
mod error;
pub mod grid;
pub mod loess;
pub mod resampling;
pub mod rng;
pub mod series;
pub mod simulation;
pub mod stats;
pub mod trend;

pub use error::{Error, Result};

pub use clustering::{
    adjusted_rand_index, em_fit, kmeans, select_model, BicRow, ClusterAssignment,
    CovarianceFamily, EmOptions, KMeansResult, MixtureModel, ModelSelection,
};
pub use grid::{
    acceleration_significance, analyze_cell, cluster_results, export_results, ingest_grid_csv,
    parse_results_csv, run_grid, CellResult, ExportFormat, GridCell, GridDataset, PipelineConfig,
};
pub use resampling::{
    bootstrap_trend, bootstrap_trend_masked, generate_weights, politis_white_block_length,
    select_ar1_weight_param, slope_significance, BlockLength, BootstrapConfig, BootstrapMethod,
    BootstrapResult, WeightProcess, QUANTILE_LEVELS,
};
pub use series::{
    ar1_mean_variance, fit_ar1, nao_adjust, simulate_ar1_trend, standardize_seasonal, AR1Fit,
    DailySeries, SeasonalProfile,
};
pub use simulation::{run_table1, run_table2, Table1, Table1Config, Table2Config, Table2Row};
pub use trend::{fit_ols_trend, sliding_trend_curve, CoefficientCurve, TrendFit};
