use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{self, Stream, StreamRng};
use crate::{Error, Result};

/// Law of a bootstrap weight sequence. Every kind has mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightProcess {
    /// +1 or -1 with probability 1/2 each.
    IidRademacher,
    IidNormal,
    /// `w_1 ~ N(0,1)`, `w_{i+1} = r w_i + sqrt(1 - r^2) eta_i`.
    Ar1 { r: f64 },
    /// Gaussian with covariance `max(0, 1 - |i-j|/bandwidth)`.
    KernelMvn { bandwidth: usize },
}

impl WeightProcess {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightProcess::Ar1 { r } if !(r > 0.0 && r < 1.0) => Err(Error::InvalidArgument(
                format!("AR(1) weight coefficient {r} outside (0, 1)"),
            )),
            WeightProcess::KernelMvn { bandwidth: 0 } => {
                Err(Error::InvalidArgument("kernel bandwidth must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Theoretical autocorrelation at `lag`.
    pub fn autocorrelation(&self, lag: usize) -> f64 {
        match *self {
            WeightProcess::IidRademacher | WeightProcess::IidNormal => f64::from(u8::from(lag == 0)),
            WeightProcess::Ar1 { r } => r.powi(lag as i32),
            WeightProcess::KernelMvn { bandwidth } => (1.0 - lag as f64 / bandwidth as f64).max(0.0),
        }
    }
}

/// Cholesky factor of a banded symmetric matrix, stored row by row.
///
/// Row `i` holds `L[i][i-p..=i]` where `p` is the half-bandwidth.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    p: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the `n x n` Toeplitz matrix with first row `acf` (`acf.len() - 1`
    /// is the half-bandwidth).
    pub fn toeplitz(n: usize, acf: &[f64]) -> Result<Self> {
        let p = acf.len().saturating_sub(1).min(n.saturating_sub(1));
        let w = p + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..=i {
                // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
                let mut s = acf[i - j];
                let klo = lo.max(j.saturating_sub(p));
                for k in klo..j {
                    s -= band[i * w + (k + p - i)] * band[j * w + (k + p - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Factorization(format!(
                            "non-positive pivot {s:e} at row {i}"
                        )));
                    }
                    band[i * w + p] = s.sqrt();
                } else {
                    band[i * w + (j + p - i)] = s / band[j * w + p];
                }
            }
        }
        Ok(Self { n, p, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `out = L z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let w = self.p + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.p);
            let row = &self.band[i * w + (lo + self.p - i)..(i + 1) * w];
            out[i] = row.iter().zip(&z[lo..=i]).map(|(l, z)| l * z).sum();
        }
    }
}

/// A weight process prepared for repeated draws of a fixed length.
#[derive(Debug, Clone)]
pub enum WeightSampler {
    Rademacher,
    Normal,
    Ar1 { r: f64, innovation: f64 },
    Kernel(BandedCholesky),
}

impl WeightSampler {
    pub fn new(process: WeightProcess, n: usize) -> Result<Self> {
        process.validate()?;
        Ok(match process {
            WeightProcess::IidRademacher => WeightSampler::Rademacher,
            WeightProcess::IidNormal => WeightSampler::Normal,
            WeightProcess::Ar1 { r } => WeightSampler::Ar1 {
                r,
                innovation: (1.0 - r * r).sqrt(),
            },
            WeightProcess::KernelMvn { bandwidth } => {
                let acf: Vec<f64> = (0..bandwidth).map(|k| process.autocorrelation(k)).collect();
                WeightSampler::Kernel(BandedCholesky::toeplitz(n, &acf)?)
            }
        })
    }

    /// Fills `out` with one weight sequence. `scratch` is only used by the kernel law.
    pub fn fill(&self, rng: &mut StreamRng, out: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            WeightSampler::Rademacher => {
                for w in out.iter_mut() {
                    *w = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
            }
            WeightSampler::Normal => {
                for w in out.iter_mut() {
                    *w = rng.sample(StandardNormal);
                }
            }
            WeightSampler::Ar1 { r, innovation } => {
                let mut prev: f64 = rng.sample(StandardNormal);
                for (i, w) in out.iter_mut().enumerate() {
                    if i > 0 {
                        prev = r * prev + innovation * rng.sample::<f64, _>(StandardNormal);
                    }
                    *w = prev;
                }
            }
            WeightSampler::Kernel(factor) => {
                scratch.clear();
                scratch.extend((0..out.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
                factor.apply(scratch, out);
            }
        }
    }
}

/// Draws one weight sequence of length `n`.
pub fn generate_weights(process: WeightProcess, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = WeightSampler::new(process, n)?;
    let mut rng = rng::stream(seed, Stream::Weights, 0);
    let mut out = vec![0.0; n];
    sampler.fill(&mut rng, &mut out, &mut Vec::new());
    Ok(out)
}
