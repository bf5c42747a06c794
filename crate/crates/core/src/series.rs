//! Daily series, seasonal standardization, NAO adjustment and AR(1) tools.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::loess::smooth_circular;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Default fractional window of the day-of-year smoother.
pub const DEFAULT_SPAN: f64 = 0.3;

/// Lag-1 coefficients are kept inside `[-R_CLAMP, R_CLAMP]`.
pub const R_CLAMP: f64 = 0.999;

/// Dated daily values with a missing-value mask. Day `i` is `start_date + i`.
///
/// Missing entries hold `NaN` in `values`; equality ignores them.
#[derive(Debug, Clone)]
pub struct DailySeries {
    start_date: NaiveDate,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl PartialEq for DailySeries {
    fn eq(&self, other: &Self) -> bool {
        self.start_date == other.start_date
            && self.missing == other.missing
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.missing)
                .all(|((a, b), m)| *m || a == b)
    }
}

impl DailySeries {
    pub fn new(start_date: NaiveDate, values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if values.len() != missing.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values but {} mask entries",
                values.len(),
                missing.len()
            )));
        }
        let values = values
            .into_iter()
            .zip(&missing)
            .map(|(v, &m)| if m { f64::NAN } else { v })
            .collect::<Vec<_>>();
        if let Some(i) = values.iter().zip(&missing).position(|(v, &m)| !m && !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            start_date,
            values,
            missing,
        })
    }

    /// Series without missing entries.
    pub fn complete(start_date: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::new(start_date, values, missing)
    }

    /// Series from optional values; `None` marks a missing day.
    pub fn from_options(start_date: NaiveDate, values: Vec<Option<f64>>) -> Result<Self> {
        let missing = values.iter().map(Option::is_none).collect();
        let values = values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Self::new(start_date, values, missing)
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date(self.len() - 1)
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.start_date + Duration::days(i as i64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        (!self.missing[i]).then(|| self.values[i])
    }

    /// Value on a calendar date, if it is inside the series and present.
    pub fn value_on(&self, date: NaiveDate) -> Option<f64> {
        let offset = (date - self.start_date).num_days();
        if offset < 0 || offset as usize >= self.len() {
            return None;
        }
        self.value(offset as usize)
    }

    pub fn n_present(&self) -> usize {
        self.missing.iter().filter(|m| !**m).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        1.0 - self.n_present() as f64 / self.len() as f64
    }

    /// Iterates over `(date, value)` for present entries.
    pub fn present(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        (0..self.len()).filter_map(|i| self.value(i).map(|v| (self.date(i), v)))
    }

    /// First calendar year fully covered by the date range.
    pub fn first_full_year(&self) -> i32 {
        let start = self.start_date;
        if start.ordinal() == 1 {
            start.year()
        } else {
            start.year() + 1
        }
    }

    /// Last calendar year fully covered by the date range.
    pub fn last_full_year(&self) -> i32 {
        let end = self.end_date();
        if end.month() == 12 && end.day() == 31 {
            end.year()
        } else {
            end.year() - 1
        }
    }

    /// Sub-series covering calendar years `first..=last`, or `None` if the range
    /// is not inside the series.
    pub fn years(&self, first: i32, last: i32) -> Option<DailySeries> {
        let from = NaiveDate::from_ymd_opt(first, 1, 1)?;
        let to = NaiveDate::from_ymd_opt(last, 12, 31)?;
        if first > last || from < self.start_date || to > self.end_date() {
            return None;
        }
        let a = (from - self.start_date).num_days() as usize;
        let b = (to - self.start_date).num_days() as usize + 1;
        Some(DailySeries {
            start_date: from,
            values: self.values[a..b].to_vec(),
            missing: self.missing[a..b].to_vec(),
        })
    }

    /// Reads `date,value` CSV; an empty value field marks a missing day.
    /// Dates must be strictly increasing; gaps become missing days.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "date" || &headers[1] != "value" {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `date,value`".into(),
            });
        }
        let mut rows: Vec<(NaiveDate, Option<f64>)> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let (date, value) = parse_date_value(&record[0], record.get(1).unwrap_or(""), line)?;
            if let Some(&(prev, _)) = rows.last() {
                if date <= prev {
                    return Err(Error::Parse {
                        line,
                        message: format!("date {date} is not after {prev}"),
                    });
                }
            }
            rows.push((date, value));
        }
        let Some(&(start, _)) = rows.first() else {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        };
        let end = rows.last().map(|r| r.0).unwrap_or(start);
        let mut values = vec![None; (end - start).num_days() as usize + 1];
        for (date, value) in rows {
            values[(date - start).num_days() as usize] = value;
        }
        Self::from_options(start, values)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["date", "value"])?;
        for i in 0..self.len() {
            let value = self.value(i).map(|v| format!("{v:e}")).unwrap_or_default();
            wtr.write_record([self.date(i).to_string(), value])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn parse_date_value(date: &str, value: &str, line: u64) -> Result<(NaiveDate, Option<f64>)> {
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|e| Error::Parse {
        line,
        message: format!("bad date {date:?}: {e}"),
    })?;
    let value = if value.is_empty() {
        None
    } else {
        let v: f64 = value.parse().map_err(|e| Error::Parse {
            line,
            message: format!("bad value {value:?}: {e}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value {value:?}"),
            });
        }
        Some(v)
    };
    Ok((date, value))
}

/// Day-of-year index in `0..365`; Dec 31 of leap years shares slot 364 with day 365.
pub fn doy_index(date: NaiveDate) -> usize {
    date.ordinal().min(365) as usize - 1
}

/// Smoothed day-of-year mean and standard deviation curves (366 entries each).
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalProfile {
    mean_by_doy: Vec<f64>,
    sd_by_doy: Vec<f64>,
}

impl SeasonalProfile {
    pub fn mean_by_doy(&self) -> &[f64] {
        &self.mean_by_doy
    }

    pub fn sd_by_doy(&self) -> &[f64] {
        &self.sd_by_doy
    }

    /// Mean for a calendar date.
    pub fn mean_on(&self, date: NaiveDate) -> f64 {
        self.mean_by_doy[date.ordinal() as usize - 1]
    }

    pub fn sd_on(&self, date: NaiveDate) -> f64 {
        self.sd_by_doy[date.ordinal() as usize - 1]
    }

    /// Maps a standardized series back to the original scale.
    pub fn restore(&self, standardized: &DailySeries) -> DailySeries {
        let values = (0..standardized.len())
            .map(|i| {
                let d = standardized.date(i);
                standardized.values[i] * self.sd_on(d) + self.mean_on(d)
            })
            .collect();
        DailySeries {
            start_date: standardized.start_date,
            values,
            missing: standardized.missing.clone(),
        }
    }
}

/// Removes the seasonal cycle in mean and in scale.
///
/// Per day-of-year means across years are smoothed with a circular local
/// quadratic fit; the per-day standard deviations of the mean-adjusted values
/// are smoothed the same way. The output is `(x - mean(d)) / sd(d)`.
pub fn standardize_seasonal(series: &DailySeries, span: f64) -> Result<(DailySeries, SeasonalProfile)> {
    const MIN_YEARS: usize = 2;
    let mut sums = [0.0_f64; 365];
    let mut counts = [0_usize; 365];
    for (date, v) in series.present() {
        let d = doy_index(date);
        sums[d] += v;
        counts[d] += 1;
    }
    if let Some((d, &c)) = counts.iter().enumerate().find(|(_, &c)| c < MIN_YEARS) {
        return Err(Error::Coverage {
            doy: d + 1,
            got: c,
            needed: MIN_YEARS,
        });
    }
    let raw_mean: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let mean = smooth_circular(&raw_mean, span)?;

    let mut squares = [0.0_f64; 365];
    for (date, v) in series.present() {
        let d = doy_index(date);
        squares[d] += (v - mean[d]).powi(2);
    }
    let raw_sd: Vec<f64> = squares
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (s / (c - 1) as f64).sqrt())
        .collect();
    let sd = smooth_circular(&raw_sd, span)?;
    // A constant series still leaves rounding noise in the smoothed curve.
    let scale = raw_mean.iter().map(|m| m.abs()).fold(1.0, f64::max);
    if let Some((d, &s)) = sd
        .iter()
        .enumerate()
        .find(|(_, &s)| !(s > 1e-12 * scale))
    {
        return Err(Error::DegenerateVariance { doy: d + 1, value: s });
    }

    let mut mean_by_doy = mean;
    mean_by_doy.push(mean_by_doy[364]);
    let mut sd_by_doy = sd;
    sd_by_doy.push(sd_by_doy[364]);
    let profile = SeasonalProfile {
        mean_by_doy,
        sd_by_doy,
    };

    let values = (0..series.len())
        .map(|i| {
            let d = series.date(i);
            (series.values[i] - profile.mean_on(d)) / profile.sd_on(d)
        })
        .collect();
    let out = DailySeries {
        start_date: series.start_date,
        values,
        missing: series.missing.clone(),
    };
    Ok((out, profile))
}

/// Regresses `series` on the NAO index (with intercept) and returns the residuals.
pub fn nao_adjust(series: &DailySeries, nao: &DailySeries) -> Result<DailySeries> {
    let mut pairs = Vec::with_capacity(series.n_present());
    for (date, y) in series.present() {
        match nao.value_on(date) {
            Some(x) => pairs.push((x, y)),
            None => {
                if pairs.is_empty() && series.present().all(|(d, _)| nao.value_on(d).is_none()) {
                    return Err(Error::EmptyOverlap);
                }
                return Err(Error::RegressorCoverage(date));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let n = pairs.len() as f64;
    let x_bar = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let y_bar = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - x_bar).powi(2)).sum();
    let x_scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * n * x_scale * x_scale {
        return Err(Error::Collinear);
    }
    let sxy: f64 = pairs.iter().map(|p| (p.0 - x_bar) * (p.1 - y_bar)).sum();
    let slope = sxy / sxx;

    let values = (0..series.len())
        .map(|i| match series.value(i) {
            Some(y) => {
                let x = nao.value_on(series.date(i)).expect("checked above");
                (y - y_bar) - slope * (x - x_bar)
            }
            None => f64::NAN,
        })
        .collect();
    Ok(DailySeries {
        start_date: series.start_date,
        values,
        missing: series.missing.clone(),
    })
}

/// Yule-Walker AR(1) fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AR1Fit {
    /// Lag-1 coefficient, clamped to `[-0.999, 0.999]`.
    pub r: f64,
    pub innovation_sd: f64,
    /// Number of adjacent pairs with both members present.
    pub n_used: usize,
}

impl AR1Fit {
    /// Stationary marginal variance implied by the fit.
    pub fn marginal_variance(&self) -> f64 {
        self.innovation_sd.powi(2) / (1.0 - self.r * self.r)
    }
}

/// Fits an AR(1) by the lag-1 sample autocorrelation. Non-finite entries are
/// treated as missing; lag pairs need both members present.
pub fn fit_ar1(xs: &[f64]) -> Result<AR1Fit> {
    const MIN_PAIRS: usize = 10;
    let n_used = xs.windows(2).filter(|w| w[0].is_finite() && w[1].is_finite()).count();
    if n_used < MIN_PAIRS {
        return Err(Error::InsufficientData {
            needed: MIN_PAIRS,
            got: n_used,
        });
    }
    let present: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let ss: f64 = present.iter().map(|x| (x - mean).powi(2)).sum();
    if ss <= 0.0 {
        return Err(Error::InvalidArgument("constant sequence has no autocorrelation".into()));
    }
    let lag1: f64 = xs
        .windows(2)
        .filter(|w| w[0].is_finite() && w[1].is_finite())
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    let r = (lag1 / ss).clamp(-R_CLAMP, R_CLAMP);
    let sample_sd = (ss / (n - 1.0)).sqrt();
    Ok(AR1Fit {
        r,
        innovation_sd: sample_sd * (1.0 - r * r).sqrt(),
        n_used,
    })
}

/// Exact variance of the mean of `n` consecutive values of a stationary AR(1)
/// with lag-1 coefficient `r` and marginal variance `marginal_var`.
pub fn ar1_mean_variance(r: f64, marginal_var: f64, n: usize) -> f64 {
    let nf = n as f64;
    // sum_{k=1}^{n-1} (1 - k/n) r^k in closed form
    let tail = if r == 0.0 {
        0.0
    } else {
        r / (1.0 - r) - r * (1.0 - r.powi(n as i32)) / (nf * (1.0 - r).powi(2))
    };
    marginal_var / nf * (1.0 + 2.0 * tail)
}

/// Simulates `y_t = trend * t + e_t`, `t = 1..=n`, with `e` a stationary AR(1).
pub fn simulate_ar1_trend(n: usize, trend: f64, r: f64, innovation_sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, Stream::Simulation, 0);
    let mut e = innovation_sd / (1.0 - r * r).sqrt() * rng.sample::<f64, _>(StandardNormal);
    let mut out = Vec::with_capacity(n);
    for t in 1..=n {
        if t > 1 {
            e = r * e + innovation_sd * rng.sample::<f64, _>(StandardNormal);
        }
        out.push(trend * t as f64 + e);
    }
    out
}
