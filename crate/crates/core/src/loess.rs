//! Local quadratic regression on a circular, equally spaced axis.
//!
//! The day-of-year axis wraps around, so every target point has the same
//! neighbourhood shape. The fitted value at a target is therefore a fixed
//! linear filter (the equivalent kernel) applied circularly, computed once
//! from a tricube-weighted quadratic fit.

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Tricube weight on `u = distance / max_distance`.
fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        (1.0 - u.powi(3)).powi(3)
    }
}

/// Equivalent kernel of a local quadratic fit with `q` nearest neighbours on a
/// circle of `len` points. Returns `(offset, weight)` pairs whose weights sum to 1.
pub fn equivalent_kernel(len: usize, span: f64) -> Result<Vec<(isize, f64)>> {
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::InvalidArgument(format!("span {span} outside (0, 1]")));
    }
    let q = ((span * len as f64).round() as usize).clamp(5, len);
    let half = len as isize / 2;
    let mut offsets: Vec<isize> = (-half..len as isize - half).collect();
    offsets.sort_by_key(|o| (o.abs(), *o));
    offsets.truncate(q);
    // Widen the radius a little so the outermost neighbours keep a small weight
    // and the design stays non-singular for tiny windows.
    let radius = offsets.iter().map(|o| o.unsigned_abs()).max().unwrap_or(1) as f64 + 1.0;

    let weights: Vec<f64> = offsets
        .iter()
        .map(|&o| tricube(o.unsigned_abs() as f64 / radius))
        .collect();
    let mut xtwx = Matrix3::<f64>::zeros();
    for (&o, &w) in offsets.iter().zip(&weights) {
        let x = Vector3::new(1.0, o as f64, (o * o) as f64);
        xtwx += w * x * x.transpose();
    }
    let inv = xtwx
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("loess window too small".into()))?;
    // Fitted value at offset 0 is e1' (X'WX)^-1 X'W y.
    let row = inv.row(0).into_owned();
    Ok(offsets
        .iter()
        .zip(&weights)
        .map(|(&o, &w)| {
            let x = Vector3::new(1.0, o as f64, (o * o) as f64);
            (o, w * (row * x)[0])
        })
        .collect())
}

/// Smooths `values`, treated as one period of a circular sequence.
pub fn smooth_circular(values: &[f64], span: f64) -> Result<Vec<f64>> {
    let len = values.len();
    if len < 5 {
        return Err(Error::InsufficientData { needed: 5, got: len });
    }
    let kernel = equivalent_kernel(len, span)?;
    Ok((0..len as isize)
        .map(|i| {
            kernel
                .iter()
                .map(|&(o, w)| w * values[(i + o).rem_euclid(len as isize) as usize])
                .sum()
        })
        .collect())
}
