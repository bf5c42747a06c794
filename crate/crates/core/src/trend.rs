//! Linear trend fits `x_t = a t + b` and sliding start-year coefficient curves.

use std::io::Write;

use crate::series::DailySeries;
use crate::{Error, Result};

/// Ordinary least squares fit of a series on its time index `t = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendFit {
    /// Slope per time step (per day for daily series).
    pub slope_a: f64,
    pub intercept_b: f64,
    pub r_squared: f64,
    /// Residuals at present positions, `NaN` where the input was missing.
    pub residuals: Vec<f64>,
    /// Number of points used.
    pub n: usize,
}

impl TrendFit {
    pub fn fitted(&self, t: usize) -> f64 {
        self.intercept_b + self.slope_a * t as f64
    }
}

/// Precomputed time-index moments for a fixed missingness pattern, so that
/// repeated refits on the same positions cost one pass each.
#[derive(Debug, Clone)]
pub struct OlsDesign {
    present: Option<Vec<usize>>,
    len: usize,
    count: usize,
    t_mean: f64,
    sxx: f64,
}

impl OlsDesign {
    pub fn new(len: usize, missing: Option<&[bool]>) -> Result<Self> {
        let present: Option<Vec<usize>> = missing
            .filter(|m| m.iter().any(|&x| x))
            .map(|m| (0..len).filter(|&i| !m[i]).collect());
        let count = present.as_ref().map_or(len, Vec::len);
        if count < 3 {
            return Err(Error::InsufficientData { needed: 3, got: count });
        }
        let (t_mean, sxx) = match &present {
            None => {
                let n = len as f64;
                ((n + 1.0) / 2.0, n * (n * n - 1.0) / 12.0)
            }
            Some(idx) => {
                let t_mean = idx.iter().map(|&i| (i + 1) as f64).sum::<f64>() / count as f64;
                let sxx = idx.iter().map(|&i| ((i + 1) as f64 - t_mean).powi(2)).sum();
                (t_mean, sxx)
            }
        };
        Ok(Self {
            present,
            len,
            count,
            t_mean,
            sxx,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_present(&self, i: usize) -> bool {
        match &self.present {
            None => true,
            Some(idx) => idx.binary_search(&i).is_ok(),
        }
    }

    fn for_each_present(&self, mut f: impl FnMut(usize)) {
        match &self.present {
            None => (0..self.len).for_each(&mut f),
            Some(idx) => idx.iter().copied().for_each(f),
        }
    }

    /// Slope and intercept of the OLS line through `(t, values[t-1])`.
    pub fn slope_intercept(&self, values: &[f64]) -> (f64, f64) {
        let mut y_sum = 0.0;
        self.for_each_present(|i| y_sum += values[i]);
        let y_mean = y_sum / self.count as f64;
        let mut sxy = 0.0;
        self.for_each_present(|i| sxy += ((i + 1) as f64 - self.t_mean) * (values[i] - y_mean));
        let slope = sxy / self.sxx;
        (slope, y_mean - slope * self.t_mean)
    }

    /// Refit returning only the slope.
    pub fn slope(&self, values: &[f64]) -> f64 {
        self.slope_intercept(values).0
    }

    pub fn fit(&self, values: &[f64]) -> TrendFit {
        let mut y_sum = 0.0;
        self.for_each_present(|i| y_sum += values[i]);
        let y_mean = y_sum / self.count as f64;
        let mut sst = 0.0;
        self.for_each_present(|i| sst += (values[i] - y_mean).powi(2));
        let (slope, intercept) = if sst == 0.0 {
            (0.0, y_mean)
        } else {
            self.slope_intercept(values)
        };
        let mut residuals = vec![f64::NAN; self.len];
        let mut sse = 0.0;
        self.for_each_present(|i| {
            let e = values[i] - (intercept + slope * (i + 1) as f64);
            residuals[i] = e;
            sse += e * e;
        });
        let r_squared = if sst == 0.0 {
            0.0
        } else {
            (1.0 - sse / sst).clamp(0.0, 1.0)
        };
        TrendFit {
            slope_a: slope,
            intercept_b: intercept,
            r_squared,
            residuals,
            n: self.count,
        }
    }
}

/// OLS trend over the present entries of `values`; `missing` marks absent days.
///
/// A constant input returns slope 0 and R² 0.
pub fn fit_ols_trend(values: &[f64], missing: Option<&[bool]>) -> Result<TrendFit> {
    if let Some(m) = missing {
        if m.len() != values.len() {
            return Err(Error::InvalidArgument("mask length differs from values".into()));
        }
    }
    Ok(OlsDesign::new(values.len(), missing)?.fit(values))
}

/// Trend fit of a daily series, time index restarting at 1 on its first day.
pub fn fit_series_trend(series: &DailySeries) -> Result<TrendFit> {
    fit_ols_trend(series.values(), Some(series.missing()))
}

/// Slopes and R² of the fits over years `first_year + k ..= last_year`, `k = 0..k_max`.
///
/// Segments that cannot be fitted are stored as `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientCurve {
    pub first_year: i32,
    pub last_year: i32,
    pub coeffs: Vec<f64>,
    pub r_squareds: Vec<f64>,
}

impl CoefficientCurve {
    pub fn k_max(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_complete(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Index and value of the largest fitted coefficient.
    pub fn max_coeff(&self) -> Option<(usize, f64)> {
        self.coeffs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, c)| c.is_finite())
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Appends `cell_id,k,slope,r_squared` rows (no header).
    pub fn write_rows<W: Write>(&self, cell_id: &str, wtr: &mut csv::Writer<W>) -> Result<()> {
        for (k, (a, r2)) in self.coeffs.iter().zip(&self.r_squareds).enumerate() {
            wtr.write_record([
                cell_id.to_owned(),
                k.to_string(),
                fmt_float(*a),
                fmt_float(*r2),
            ])?;
        }
        Ok(())
    }
}

pub const CURVE_HEADER: [&str; 4] = ["cell_id", "k", "slope", "r_squared"];

/// Shortest representation that parses back to the same `f64`; empty for `NaN`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

/// Fits the `k_max` suffix segments of `series`.
pub fn sliding_trend_curve(
    series: &DailySeries,
    first_year: i32,
    last_year: i32,
    k_max: usize,
) -> Result<CoefficientCurve> {
    if last_year - first_year < 1 || k_max as i32 > last_year - first_year - 1 || k_max == 0 {
        return Err(Error::InvalidArgument(format!(
            "k_max {k_max} does not fit in years {first_year}..={last_year}"
        )));
    }
    if series.years(first_year, last_year).is_none() {
        return Err(Error::InvalidArgument(format!(
            "series {}..{} does not span {first_year}..={last_year}",
            series.start_date(),
            series.end_date()
        )));
    }
    let mut coeffs = Vec::with_capacity(k_max);
    let mut r_squareds = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let segment = series
            .years(first_year + k as i32, last_year)
            .expect("inside the checked span");
        match fit_series_trend(&segment) {
            Ok(fit) => {
                coeffs.push(fit.slope_a);
                r_squareds.push(fit.r_squared);
            }
            Err(Error::InsufficientData { .. }) => {
                coeffs.push(f64::NAN);
                r_squareds.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CoefficientCurve {
        first_year,
        last_year,
        coeffs,
        r_squareds,
    })
}
