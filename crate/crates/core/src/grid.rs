//! Gridded ingestion, per-cell analysis, acceleration test and result export.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::clustering::{select_model, CovarianceFamily, EmOptions, ModelSelection};
use crate::resampling::{
    bootstrap_trend_masked, default_r_grid, slope_significance, Ar1Weight, BootstrapConfig,
    BootstrapMethod,
};
use crate::rng::{derive_seed, seed_for_key, Stream};
use crate::series::{nao_adjust, parse_date_value, standardize_seasonal, DailySeries, DEFAULT_SPAN};
use crate::trend::{fmt_float, sliding_trend_curve, CoefficientCurve, CURVE_HEADER};
use crate::{Error, Result};

pub const GRID_HEADER: [&str; 5] = ["cell_id", "lat", "lon", "date", "value"];
pub const RESULTS_HEADER: [&str; 8] = [
    "cell_id",
    "lat",
    "lon",
    "max_coeff",
    "r2_max",
    "sig_fraction",
    "p_nonpositive",
    "cluster",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub cell_id: String,
    pub lat: f64,
    pub lon: f64,
}

/// Cells keyed by id, each with its own daily series.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    pub cells: Vec<GridCell>,
    pub series: BTreeMap<String, DailySeries>,
    /// Smallest positive spacing between distinct latitudes or longitudes.
    pub resolution: Option<f64>,
}

impl GridDataset {
    pub fn cell(&self, id: &str) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.cell_id == id)
    }
}

struct CellRows {
    lat: f64,
    lon: f64,
    first_line: u64,
    values: BTreeMap<NaiveDate, Option<f64>>,
}

/// Reads `cell_id,lat,lon,date,value` rows. Absent dates inside a cell's
/// range become missing days; an empty value is missing too.
pub fn ingest_grid<R: Read>(reader: R) -> Result<GridDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != GRID_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", GRID_HEADER.join(",")),
        });
    }
    let mut cells: BTreeMap<String, CellRows> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let coord = |idx: usize, name: &str, bound: f64| -> Result<f64> {
            let v: f64 = record[idx].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad {name} {:?}", &record[idx]),
            })?;
            if !(v.abs() <= bound) {
                return Err(Error::Parse {
                    line,
                    message: format!("{name} {v} outside [-{bound}, {bound}]"),
                });
            }
            Ok(v)
        };
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty cell_id".into(),
            });
        }
        let lat = coord(1, "lat", 90.0)?;
        let lon = coord(2, "lon", 180.0)?;
        let (date, value) = parse_date_value(&record[3], &record[4], line)?;
        let cell = cells.entry(id.clone()).or_insert_with(|| CellRows {
            lat,
            lon,
            first_line: line,
            values: BTreeMap::new(),
        });
        if cell.lat != lat || cell.lon != lon {
            return Err(Error::Parse {
                line,
                message: format!(
                    "cell {id} moved from ({}, {}) (line {}) to ({lat}, {lon})",
                    cell.lat, cell.lon, cell.first_line
                ),
            });
        }
        if cell.values.insert(date, value).is_some() {
            return Err(Error::DuplicateDate { cell: id, date });
        }
    }

    let mut dataset = GridDataset {
        cells: Vec::with_capacity(cells.len()),
        series: BTreeMap::new(),
        resolution: None,
    };
    for (id, rows) in cells {
        let start = *rows.values.keys().next().expect("cells have at least one row");
        let end = *rows.values.keys().next_back().expect("non-empty");
        let mut values = vec![None; (end - start).num_days() as usize + 1];
        for (date, v) in rows.values {
            values[(date - start).num_days() as usize] = v;
        }
        dataset.series.insert(id.clone(), DailySeries::from_options(start, values)?);
        dataset.cells.push(GridCell {
            cell_id: id,
            lat: rows.lat,
            lon: rows.lon,
        });
    }
    dataset.resolution = infer_resolution(&dataset.cells);
    Ok(dataset)
}

pub fn ingest_grid_csv(path: impl AsRef<Path>) -> Result<GridDataset> {
    ingest_grid(std::fs::File::open(path)?)
}

/// Writes the dataset in the layout read by [`ingest_grid`]; missing days are
/// written with an empty value.
pub fn write_grid_csv<W: Write>(dataset: &GridDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(GRID_HEADER)?;
    for cell in &dataset.cells {
        let series = &dataset.series[&cell.cell_id];
        let (lat, lon) = (fmt_float(cell.lat), fmt_float(cell.lon));
        for i in 0..series.len() {
            wtr.write_record([
                cell.cell_id.as_str(),
                &lat,
                &lon,
                &series.date(i).to_string(),
                &series.value(i).map(fmt_float).unwrap_or_default(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn infer_resolution(cells: &[GridCell]) -> Option<f64> {
    let step = |mut v: Vec<f64>| -> Option<f64> {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).min_by(f64::total_cmp)
    };
    let lat = step(cells.iter().map(|c| c.lat).collect());
    let lon = step(cells.iter().map(|c| c.lon).collect());
    match (lat, lon) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Settings of the per-cell pipeline and of the clustering step.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Fractional window of the seasonal smoother.
    pub span: f64,
    /// Number of sliding start years.
    pub k_max: usize,
    /// The two start-year offsets compared by the acceleration test.
    pub k_compare: Vec<usize>,
    /// Bootstrap replicates per compared segment.
    pub replicates: usize,
    /// Inner replicates of the AR(1) weight selection.
    pub selection_replicates: usize,
    /// Cells with a larger fraction of missing days are excluded.
    pub missing_threshold: f64,
    pub seed: u64,
    /// Defaults to the first full calendar year of each cell.
    pub first_year: Option<i32>,
    /// Defaults to the last full calendar year of each cell.
    pub last_year: Option<i32>,
    pub cluster_k_min: usize,
    pub cluster_k_max: usize,
    pub families: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            span: DEFAULT_SPAN,
            k_max: 30,
            k_compare: vec![20, 30],
            replicates: 100,
            selection_replicates: 200,
            missing_threshold: 0.2,
            seed: 0,
            first_year: None,
            last_year: None,
            cluster_k_min: 1,
            cluster_k_max: 20,
            families: CovarianceFamily::ALL.iter().map(|f| f.code().to_owned()).collect(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.span > 0.0 && self.span <= 1.0) {
            return bad(format!("span {} outside (0, 1]", self.span));
        }
        if self.k_max == 0 {
            return bad("k_max must be positive".into());
        }
        if self.k_compare.len() != 2 {
            return bad("k_compare needs exactly two offsets".into());
        }
        if self.replicates == 0 || self.selection_replicates < 2 {
            return bad("replicates must be positive and selection_replicates at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.missing_threshold) {
            return bad(format!("missing_threshold {} outside [0, 1]", self.missing_threshold));
        }
        if self.cluster_k_min == 0 || self.cluster_k_min > self.cluster_k_max {
            return bad("cluster K range is empty".into());
        }
        self.covariance_families()?;
        Ok(())
    }

    pub fn covariance_families(&self) -> Result<Vec<CovarianceFamily>> {
        if self.families.is_empty() {
            return Err(Error::InvalidArgument("no covariance families".into()));
        }
        self.families.iter().map(|f| f.parse()).collect()
    }

    pub fn cluster_k_range(&self) -> RangeInclusive<usize> {
        self.cluster_k_min..=self.cluster_k_max
    }
}

/// Everything computed for one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell_id: String,
    pub lat: f64,
    pub lon: f64,
    pub missing_fraction: f64,
    /// Set when the cell exceeded the missing-data threshold and was not analysed.
    pub excluded: bool,
    pub curve: Option<CoefficientCurve>,
    /// Largest coefficient of the curve (per day).
    pub max_coeff: f64,
    /// R² of the segment that attains `max_coeff`.
    pub r2_max: f64,
    /// Share of replicate pairs where the later start year has the larger slope.
    pub sig_fraction: f64,
    /// Share of non-positive bootstrap slopes for the first compared offset.
    pub p_nonpositive: f64,
    pub cluster: Option<usize>,
    /// `(k, AR(1) weight coefficient, slope replicates)` per compared offset.
    pub replicates: Vec<(usize, f64, Vec<f64>)>,
}

impl CellResult {
    fn excluded(cell: &GridCell, missing_fraction: f64) -> Self {
        Self {
            cell_id: cell.cell_id.clone(),
            lat: cell.lat,
            lon: cell.lon,
            missing_fraction,
            excluded: true,
            curve: None,
            max_coeff: f64::NAN,
            r2_max: f64::NAN,
            sig_fraction: f64::NAN,
            p_nonpositive: f64::NAN,
            cluster: None,
            replicates: Vec::new(),
        }
    }
}

/// Share of index-paired replicates where `later > earlier`; ties count one half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceleration {
    pub fraction: f64,
    /// The inputs differed in length and were paired up to the shorter one.
    pub truncated: bool,
}

pub fn acceleration_significance(earlier: &[f64], later: &[f64]) -> Result<Acceleration> {
    let pairs = earlier.len().min(later.len());
    if pairs == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let score: f64 = earlier
        .iter()
        .zip(later)
        .map(|(a, b)| {
            if b > a {
                1.0
            } else if b == a {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Ok(Acceleration {
        fraction: score / pairs as f64,
        truncated: earlier.len() != later.len(),
    })
}

/// Standardizes, optionally NAO-adjusts, fits the sliding curve and
/// bootstraps the compared segments of one cell.
pub fn analyze_cell(
    cell: &GridCell,
    series: &DailySeries,
    nao: Option<&DailySeries>,
    config: &PipelineConfig,
) -> Result<CellResult> {
    analyze_cell_inner(cell, series, nao, config).map_err(|e| e.in_cell(&cell.cell_id))
}

fn analyze_cell_inner(
    cell: &GridCell,
    series: &DailySeries,
    nao: Option<&DailySeries>,
    config: &PipelineConfig,
) -> Result<CellResult> {
    config.validate()?;
    let first = config.first_year.unwrap_or_else(|| series.first_full_year());
    let last = config.last_year.unwrap_or_else(|| series.last_full_year());
    let span = series.years(first, last).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "series {}..{} does not cover {first}..={last}",
            series.start_date(),
            series.end_date()
        ))
    })?;
    let missing_fraction = span.missing_fraction();
    let (mut z, _) = standardize_seasonal(&span, config.span)?;
    if let Some(nao) = nao {
        z = nao_adjust(&z, nao)?;
    }
    let curve = sliding_trend_curve(&z, first, last, config.k_max)?;
    let (arg, max_coeff) = curve
        .max_coeff()
        .ok_or(Error::InsufficientData { needed: 3, got: 0 })?;
    let r2_max = curve.r_squareds[arg];

    let cell_seed = seed_for_key(config.seed, &cell.cell_id);
    let method = BootstrapMethod::DepWildAr1(Ar1Weight::Selected {
        grid: default_r_grid(),
        inner_replicates: config.selection_replicates,
    });
    let mut replicates = Vec::with_capacity(config.k_compare.len());
    let mut p_nonpositive = f64::NAN;
    for (slot, &k) in config.k_compare.iter().enumerate() {
        let segment = z.years(first + k as i32, last).ok_or_else(|| {
            Error::InvalidArgument(format!("offset {k} leaves no data in {first}..={last}"))
        })?;
        let boot_config = BootstrapConfig::new(
            method.clone(),
            config.replicates,
            derive_seed(cell_seed, Stream::Weights, k as u64),
        );
        let result = bootstrap_trend_masked(segment.values(), Some(segment.missing()), &boot_config)?;
        if slot == 0 {
            p_nonpositive = slope_significance(&result);
        }
        replicates.push((k, result.weight_r.unwrap_or(f64::NAN), result.slope_replicates));
    }
    let sig_fraction = acceleration_significance(&replicates[0].2, &replicates[1].2)?.fraction;
    Ok(CellResult {
        cell_id: cell.cell_id.clone(),
        lat: cell.lat,
        lon: cell.lon,
        missing_fraction,
        excluded: false,
        curve: Some(curve),
        max_coeff,
        r2_max,
        sig_fraction,
        p_nonpositive,
        cluster: None,
        replicates,
    })
}

/// Results of a whole-grid run, ordered by cell id.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub results: Vec<CellResult>,
    pub failures: Vec<(String, String)>,
}

/// Analyses every cell in parallel. Cells above the missing-data threshold are
/// kept as excluded rows; cells whose analysis fails are listed in `failures`.
pub fn run_grid(dataset: &GridDataset, nao: Option<&DailySeries>, config: &PipelineConfig) -> Result<GridRun> {
    config.validate()?;
    let outcomes: Vec<std::result::Result<CellResult, (String, String)>> = dataset
        .cells
        .par_iter()
        .map(|cell| {
            let series = &dataset.series[&cell.cell_id];
            let missing = match (config.first_year, config.last_year) {
                (Some(a), Some(b)) => series.years(a, b).map_or(1.0, |s| s.missing_fraction()),
                _ => series.missing_fraction(),
            };
            if missing > config.missing_threshold {
                return Ok(CellResult::excluded(cell, missing));
            }
            analyze_cell(cell, series, nao, config).map_err(|e| (cell.cell_id.clone(), e.to_string()))
        })
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    results.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
    failures.sort();
    Ok(GridRun { results, failures })
}

/// Clusters the complete coefficient curves of non-excluded cells and stores
/// the labels. Returns the selection and the ids of the clustered cells.
pub fn cluster_results(
    results: &mut [CellResult],
    config: &PipelineConfig,
    options: &EmOptions,
) -> Result<(ModelSelection, Vec<String>)> {
    let (ids, points): (Vec<String>, Vec<Vec<f64>>) = results
        .iter()
        .filter(|r| !r.excluded)
        .filter_map(|r| {
            let curve = r.curve.as_ref()?;
            curve.is_complete().then(|| (r.cell_id.clone(), curve.coeffs.clone()))
        })
        .unzip();
    let families = config.covariance_families()?;
    let selection = select_model(&points, config.cluster_k_range(), &families, config.seed, options)?;
    for r in results.iter_mut() {
        r.cluster = ids
            .iter()
            .position(|id| *id == r.cell_id)
            .map(|i| selection.assignment.labels[i]);
    }
    Ok((selection, ids))
}

/// Writes every cell's curve as `cell_id,k,slope,r_squared`.
pub fn write_curves_csv<W: Write>(results: &[CellResult], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CURVE_HEADER)?;
    for r in results {
        if let Some(curve) = &r.curve {
            curve.write_rows(&r.cell_id, &mut wtr)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `cell_id,k,slope,r_squared` rows back into per-cell slope vectors,
/// ordered by cell id and `k`.
pub fn read_curves_csv<R: Read>(reader: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut cells: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        let k: usize = record[1].parse().map_err(|_| parse_err("k"))?;
        let slope = if record[2].is_empty() {
            f64::NAN
        } else {
            record[2].parse().map_err(|_| parse_err("slope"))?
        };
        cells.entry(record[0].to_owned()).or_default().insert(k, slope);
    }
    Ok(cells
        .into_iter()
        .map(|(id, ks)| (id, ks.into_values().collect()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    GeoJson,
}

/// Row of the exported results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedRow {
    pub cell_id: String,
    pub lat: f64,
    pub lon: f64,
    pub max_coeff: f64,
    pub r2_max: f64,
    pub sig_fraction: f64,
    pub p_nonpositive: f64,
    pub cluster: Option<usize>,
}

impl From<&CellResult> for ExportedRow {
    fn from(r: &CellResult) -> Self {
        Self {
            cell_id: r.cell_id.clone(),
            lat: r.lat,
            lon: r.lon,
            max_coeff: r.max_coeff,
            r2_max: r.r2_max,
            sig_fraction: r.sig_fraction,
            p_nonpositive: r.p_nonpositive,
            cluster: r.cluster,
        }
    }
}

fn json_number(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Writes the per-cell map table as CSV or as a GeoJSON point collection.
pub fn export_results<W: Write>(results: &[CellResult], format: ExportFormat, writer: W) -> Result<()> {
    match format {
        ExportFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(writer);
            wtr.write_record(RESULTS_HEADER)?;
            for r in results {
                wtr.write_record([
                    r.cell_id.clone(),
                    fmt_float(r.lat),
                    fmt_float(r.lon),
                    fmt_float(r.max_coeff),
                    fmt_float(r.r2_max),
                    fmt_float(r.sig_fraction),
                    fmt_float(r.p_nonpositive),
                    r.cluster.map(|c| c.to_string()).unwrap_or_default(),
                ])?;
            }
            wtr.flush()?;
        }
        ExportFormat::GeoJson => {
            let features: Vec<serde_json::Value> = results
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "type": "Feature",
                        "geometry": { "type": "Point", "coordinates": [r.lon, r.lat] },
                        "properties": {
                            "cell_id": r.cell_id,
                            "max_coeff": json_number(r.max_coeff),
                            "r2_max": json_number(r.r2_max),
                            "sig_fraction": json_number(r.sig_fraction),
                            "p_nonpositive": json_number(r.p_nonpositive),
                            "cluster": r.cluster,
                        }
                    })
                })
                .collect();
            let doc = serde_json::json!({ "type": "FeatureCollection", "features": features });
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, &doc)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn export_results_path(results: &[CellResult], format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    export_results(results, format, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Parses the CSV written by [`export_results`]; empty numeric fields read as `NaN`.
pub fn parse_results_csv<R: Read>(reader: R) -> Result<Vec<ExportedRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            if record[i].is_empty() {
                Ok(f64::NAN)
            } else {
                record[i].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number {:?}", &record[i]),
                })
            }
        };
        rows.push(ExportedRow {
            cell_id: record[0].to_owned(),
            lat: num(1)?,
            lon: num(2)?,
            max_coeff: num(3)?,
            r2_max: num(4)?,
            sig_fraction: num(5)?,
            p_nonpositive: num(6)?,
            cluster: if record[7].is_empty() {
                None
            } else {
                Some(record[7].parse().map_err(|_| Error::Parse {
                    line,
                    message: "bad cluster".into(),
                })?)
            },
        });
    }
    Ok(rows)
}
