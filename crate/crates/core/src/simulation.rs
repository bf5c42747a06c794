//! Seeded Monte Carlo experiments comparing the bootstrap schemes on
//! simulated AR(1)-plus-trend series.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rayon::prelude::*;

use crate::grid::{GridCell, GridDataset};

use crate::resampling::{
    bootstrap_trend, slope_significance, Ar1Weight, BlockLength, BootstrapConfig, BootstrapMethod,
    IidWeights, QUANTILE_LEVELS,
};
use crate::rng::{self, derive_seed, seed_for_key, Stream};
use crate::series::{simulate_ar1_trend, DailySeries};
use crate::stats::{mean, quantiles};
use crate::trend::{fit_ols_trend, fmt_float};
use crate::{Error, Result};

/// Innovation sd whose exact OLS slope spread (2.5%–97.5%) for n = 23360,
/// r = 0.812 equals 3.79e-5.
pub const TABLE1_INNOVATION_SD: f64 = 1.874;

/// Factor applied to slopes in the printed quantile table.
pub const TABLE1_SCALE: f64 = 1e5;

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Config {
    pub n: usize,
    pub r: f64,
    pub trend: f64,
    pub innovation_sd: f64,
    /// Simulated series.
    pub outer: usize,
    /// Bootstrap replicates per series and method.
    pub inner: usize,
    /// Inner replicates of the AR(1) weight selection.
    pub selection_replicates: usize,
    pub seed: u64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            n: 23360,
            r: 0.812,
            trend: 8.6e-5,
            innovation_sd: TABLE1_INNOVATION_SD,
            outer: 500,
            inner: 500,
            selection_replicates: 200,
            seed: 0,
        }
    }
}

impl Table1Config {
    fn validate(&self) -> Result<()> {
        if self.n < 100 || self.outer < 2 || self.inner < 2 || self.selection_replicates < 2 {
            return Err(Error::InvalidArgument(
                "need n >= 100 and at least 2 outer, inner and selection replicates".into(),
            ));
        }
        if !(self.r.abs() < 1.0) || !(self.innovation_sd > 0.0) || !self.trend.is_finite() {
            return Err(Error::InvalidArgument("need |r| < 1, innovation_sd > 0 and a finite trend".into()));
        }
        Ok(())
    }

    fn methods(&self) -> [BootstrapMethod; 3] {
        [
            BootstrapMethod::MovingBlock(BlockLength::Auto),
            BootstrapMethod::Wild(IidWeights::Rademacher),
            BootstrapMethod::DepWildAr1(Ar1Weight::Selected {
                grid: crate::resampling::default_r_grid(),
                inner_replicates: self.selection_replicates,
            }),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRow {
    pub label: &'static str,
    /// Slope quantiles at [`QUANTILE_LEVELS`], per day and unscaled.
    pub quantiles: Vec<f64>,
}

impl QuantileRow {
    pub fn width(&self) -> f64 {
        self.quantiles[QUANTILE_LEVELS.len() - 1] - self.quantiles[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    /// AR(1) truth, block, independent wild and dependent wild, in that order.
    pub rows: Vec<QuantileRow>,
    pub mean_block_length: f64,
    pub mean_weight_r: f64,
    /// Slope estimates of the simulated series.
    pub true_slopes: Vec<f64>,
}

pub const TRUTH_ROW: &str = "AR(1) process";
pub const BLOCK_ROW: &str = "block bootstrap";
pub const WILD_ROW: &str = "indep. weighted boot";
pub const DEP_WILD_ROW: &str = "dep. weighted boot";

impl Table1 {
    pub fn row(&self, label: &str) -> Option<&QuantileRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Writes `method,q0.025,...,q0.975` with values multiplied by [`TABLE1_SCALE`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_owned()];
        header.extend(QUANTILE_LEVELS.iter().map(|l| format!("q{l}")));
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.label.to_owned()];
            record.extend(row.quantiles.iter().map(|q| format!("{:.4}", q * TABLE1_SCALE)));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

struct OuterRun {
    slope: f64,
    quantiles: [Vec<f64>; 3],
    block_length: f64,
    weight_r: f64,
}

/// Simulates `outer` series, bootstraps each with the block, wild and
/// dependent wild schemes and averages the per-series quantiles.
pub fn run_table1(config: &Table1Config) -> Result<Table1> {
    config.validate()?;
    let methods = config.methods();
    let runs: Vec<OuterRun> = (0..config.outer)
        .into_par_iter()
        .map(|i| -> Result<OuterRun> {
            let series_seed = derive_seed(config.seed, Stream::Simulation, i as u64);
            let y = simulate_ar1_trend(config.n, config.trend, config.r, config.innovation_sd, series_seed);
            let slope = fit_ols_trend(&y, None)?.slope_a;
            let mut out = OuterRun {
                slope,
                quantiles: Default::default(),
                block_length: f64::NAN,
                weight_r: f64::NAN,
            };
            for (m, method) in methods.iter().enumerate() {
                let boot_seed = derive_seed(series_seed, Stream::Resample, m as u64);
                let res = bootstrap_trend(&y, &BootstrapConfig::new(method.clone(), config.inner, boot_seed))?;
                if let Some(b) = res.block_length {
                    out.block_length = b as f64;
                }
                if let Some(r) = res.weight_r {
                    out.weight_r = r;
                }
                out.quantiles[m] = res.quantiles.iter().map(|q| q.1).collect();
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let true_slopes: Vec<f64> = runs.iter().map(|r| r.slope).collect();
    let average = |m: usize| -> Vec<f64> {
        (0..QUANTILE_LEVELS.len())
            .map(|j| mean(&runs.iter().map(|r| r.quantiles[m][j]).collect::<Vec<_>>()))
            .collect()
    };
    let rows = vec![
        QuantileRow {
            label: TRUTH_ROW,
            quantiles: quantiles(&true_slopes, &QUANTILE_LEVELS),
        },
        QuantileRow { label: BLOCK_ROW, quantiles: average(0) },
        QuantileRow { label: WILD_ROW, quantiles: average(1) },
        QuantileRow { label: DEP_WILD_ROW, quantiles: average(2) },
    ];
    Ok(Table1 {
        rows,
        mean_block_length: mean(&runs.iter().map(|r| r.block_length).collect::<Vec<_>>()),
        mean_weight_r: mean(&runs.iter().map(|r| r.weight_r).collect::<Vec<_>>()),
        true_slopes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Config {
    pub year_counts: Vec<usize>,
    pub trend: f64,
    pub r: f64,
    pub innovation_sd: f64,
    pub outer: usize,
    pub inner: usize,
    pub selection_replicates: usize,
    pub seed: u64,
}

impl Default for Table2Config {
    fn default() -> Self {
        Self {
            year_counts: vec![10, 30, 60],
            trend: 1e-4,
            r: 0.9,
            innovation_sd: 0.19_f64.sqrt(),
            outer: 100,
            inner: 500,
            selection_replicates: 200,
            seed: 0,
        }
    }
}

impl Table2Config {
    fn validate(&self) -> Result<()> {
        if self.year_counts.is_empty() || self.year_counts.contains(&0) {
            return Err(Error::InvalidArgument("year counts must be positive and non-empty".into()));
        }
        if self.outer == 0 || self.inner < 2 || self.selection_replicates < 2 {
            return Err(Error::InvalidArgument(
                "need outer >= 1 and at least 2 inner and selection replicates".into(),
            ));
        }
        if !(self.r.abs() < 1.0) || !(self.innovation_sd > 0.0) || !self.trend.is_finite() {
            return Err(Error::InvalidArgument("need |r| < 1, innovation_sd > 0 and a finite trend".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub years: usize,
    pub n: usize,
    /// Mean over series of the percentage of non-positive bootstrap slopes.
    pub percent_negative: f64,
    pub mean_weight_r: f64,
}

pub const TABLE2_HEADER: [&str; 4] = ["years", "n", "percent_negative", "mean_weight_r"];

pub fn write_table2_csv<W: Write>(rows: &[Table2Row], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TABLE2_HEADER)?;
    for row in rows {
        wtr.write_record([
            row.years.to_string(),
            row.n.to_string(),
            format!("{:.4}", row.percent_negative),
            fmt_float(row.mean_weight_r),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// For each year count, simulates series of `365 * years` days and reports the
/// mean share of non-positive slopes under the dependent wild bootstrap.
pub fn run_table2(config: &Table2Config) -> Result<Vec<Table2Row>> {
    config.validate()?;
    let method = BootstrapMethod::DepWildAr1(Ar1Weight::Selected {
        grid: crate::resampling::default_r_grid(),
        inner_replicates: config.selection_replicates,
    });
    config
        .year_counts
        .iter()
        .map(|&years| {
            let n = 365 * years;
            let year_seed = derive_seed(config.seed, Stream::Simulation, years as u64);
            let per_series: Vec<(f64, f64)> = (0..config.outer)
                .into_par_iter()
                .map(|i| -> Result<(f64, f64)> {
                    let seed = derive_seed(year_seed, Stream::Simulation, i as u64);
                    let y = simulate_ar1_trend(n, config.trend, config.r, config.innovation_sd, seed);
                    let boot_seed = derive_seed(seed, Stream::Resample, 0);
                    let res = bootstrap_trend(&y, &BootstrapConfig::new(method.clone(), config.inner, boot_seed))?;
                    Ok((slope_significance(&res), res.weight_r.unwrap_or(f64::NAN)))
                })
                .collect::<Result<_>>()?;
            Ok(Table2Row {
                years,
                n,
                percent_negative: 100.0 * mean(&per_series.iter().map(|p| p.0).collect::<Vec<_>>()),
                mean_weight_r: mean(&per_series.iter().map(|p| p.1).collect::<Vec<_>>()),
            })
        })
        .collect()
}

/// Generator for synthetic daily temperature cells: a seasonal mean and
/// scale around standardized AR(1) noise plus a linear trend.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCell {
    /// Trend per day in standardized units.
    pub trend: f64,
    /// The trend is zero before January 1 of this year and linear afterwards.
    pub trend_start_year: Option<i32>,
    pub r: f64,
    pub innovation_sd: f64,
    /// Fraction of days dropped at random.
    pub missing_fraction: f64,
}

impl Default for SyntheticCell {
    fn default() -> Self {
        Self {
            trend: 0.0,
            trend_start_year: None,
            r: 0.8,
            innovation_sd: 0.6,
            missing_fraction: 0.0,
        }
    }
}

/// Daily series for the calendar years `first_year..first_year + years`.
pub fn synthetic_series(first_year: i32, years: usize, cell: &SyntheticCell, seed: u64) -> Result<DailySeries> {
    let start = NaiveDate::from_ymd_opt(first_year, 1, 1)
        .ok_or_else(|| Error::InvalidArgument(format!("bad year {first_year}")))?;
    let end = NaiveDate::from_ymd_opt(first_year + years as i32, 1, 1)
        .ok_or_else(|| Error::InvalidArgument("bad year count".into()))?;
    let n = (end - start).num_days() as usize;
    let noise = if cell.innovation_sd > 0.0 {
        simulate_ar1_trend(n, 0.0, cell.r, cell.innovation_sd, seed)
    } else {
        vec![0.0; n]
    };
    let onset = cell
        .trend_start_year
        .and_then(|y| NaiveDate::from_ymd_opt(y, 1, 1))
        .map_or(0, |d| (d - start).num_days().max(0) as usize);
    let mut drop = rng::stream(seed, Stream::Simulation, 1);
    let values = noise
        .iter()
        .enumerate()
        .map(|(t, e)| {
            if cell.missing_fraction > 0.0 && drop.gen::<f64>() < cell.missing_fraction {
                return None;
            }
            let phase = 2.0 * std::f64::consts::PI * f64::from((start + chrono::Days::new(t as u64)).ordinal0()) / 365.25;
            let mean = 10.0 - 9.0 * phase.cos();
            let scale = 4.0 + 1.0 * phase.sin();
            let trend = if t >= onset { cell.trend * (t - onset) as f64 } else { 0.0 };
            Some(mean + scale * (e + trend))
        })
        .collect();
    DailySeries::from_options(start, values)
}

/// `rows × cols` cells on a 0.5° grid. Cell ids are `r{i}c{j}`; each cell
/// draws from its own substream of `seed`.
pub fn synthetic_grid(
    rows: usize,
    cols: usize,
    first_year: i32,
    years: usize,
    cell: &SyntheticCell,
    seed: u64,
) -> Result<GridDataset> {
    let mut cells = Vec::with_capacity(rows * cols);
    let mut series = BTreeMap::new();
    for i in 0..rows {
        for j in 0..cols {
            let id = format!("r{i}c{j}");
            let s = synthetic_series(first_year, years, cell, seed_for_key(seed, &id))?;
            series.insert(id.clone(), s);
            cells.push(GridCell {
                cell_id: id,
                lat: 45.0 + 0.5 * i as f64,
                lon: 10.0 + 0.5 * j as f64,
            });
        }
    }
    cells.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
    let resolution = (rows * cols > 1).then_some(0.5);
    Ok(GridDataset { cells, series, resolution })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_smoke_shape_and_determinism() {
        let config = Table1Config { n: 3650, outer: 4, inner: 20, selection_replicates: 4, seed: 3, ..Default::default() };
        let t = run_table1(&config).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(
            t.rows.iter().map(|r| r.label).collect::<Vec<_>>(),
            [TRUTH_ROW, BLOCK_ROW, WILD_ROW, DEP_WILD_ROW]
        );
        for row in &t.rows {
            assert_eq!(row.quantiles.len(), 7);
            assert!(row.quantiles.windows(2).all(|w| w[0] <= w[1]), "{row:?}");
        }
        assert!(t.mean_block_length >= 1.0);
        assert!(t.mean_weight_r > 0.0 && t.mean_weight_r < 1.0);
        assert_eq!(t, run_table1(&config).unwrap());

        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("method,q0.025,q0.05,q0.25,q0.5,q0.75,q0.95,q0.975\n"));
    }

    #[test]
    fn table2_smoke() {
        let config = Table2Config { year_counts: vec![1, 2], outer: 3, inner: 20, selection_replicates: 4, seed: 5, ..Default::default() };
        let rows = run_table2(&config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].n, 730);
        for r in &rows {
            assert!((0.0..=100.0).contains(&r.percent_negative));
        }
        assert_eq!(rows, run_table2(&config).unwrap());
    }

    #[test]
    fn synthetic_series_layout() {
        let s = synthetic_series(1951, 2, &SyntheticCell::default(), 1).unwrap();
        assert_eq!(s.len(), 365 + 366);
        assert_eq!(s.first_full_year(), 1951);
        assert_eq!(s.last_full_year(), 1952);
        assert_eq!(s.n_present(), s.len());
        let holes = SyntheticCell { missing_fraction: 0.3, ..Default::default() };
        let s = synthetic_series(1951, 10, &holes, 1).unwrap();
        assert!((s.missing_fraction() - 0.3).abs() < 0.03);
        let g = synthetic_grid(2, 3, 1951, 1, &SyntheticCell::default(), 9).unwrap();
        assert_eq!(g.cells.len(), 6);
        assert_ne!(g.series["r0c0"].values(), g.series["r1c2"].values());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(run_table1(&Table1Config { r: 1.0, ..Default::default() }).is_err());
        assert!(run_table1(&Table1Config { outer: 1, ..Default::default() }).is_err());
        assert!(run_table2(&Table2Config { year_counts: vec![], ..Default::default() }).is_err());
        assert!(run_table2(&Table2Config { innovation_sd: 0.0, ..Default::default() }).is_err());
    }
}
