use std::fmt;
use std::str::FromStr;

use crate::Error;

/// Covariance constraint of a Gaussian mixture, in mclust's three-letter
/// naming (volume, shape, orientation; E = equal, V = varying, I = identity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CovarianceFamily {
    /// `lambda I`
    EII,
    /// `lambda_k I`
    VII,
    /// one shared full covariance
    EEE,
    /// `lambda_k D_k A D_k'` with a shared shape `A`
    VEV,
    /// unconstrained per component
    VVV,
}

impl CovarianceFamily {
    pub const ALL: [CovarianceFamily; 5] = [Self::EII, Self::VII, Self::EEE, Self::VEV, Self::VVV];

    pub fn code(self) -> &'static str {
        match self {
            Self::EII => "EII",
            Self::VII => "VII",
            Self::EEE => "EEE",
            Self::VEV => "VEV",
            Self::VVV => "VVV",
        }
    }

    /// Free covariance parameters for `k` components in dimension `d`.
    pub fn covariance_params(self, k: usize, d: usize) -> usize {
        match self {
            Self::EII => 1,
            Self::VII => k,
            Self::EEE => d * (d + 1) / 2,
            Self::VEV => k + (d - 1) + k * d * (d - 1) / 2,
            Self::VVV => k * d * (d + 1) / 2,
        }
    }

    /// Mixing weights, means and covariance parameters.
    pub fn n_params(self, k: usize, d: usize) -> usize {
        (k - 1) + k * d + self.covariance_params(k, d)
    }
}

impl fmt::Display for CovarianceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for CovarianceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown covariance family {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn parse_and_display() {
        for f in CovarianceFamily::ALL {
            assert_eq!(f.code().parse::<CovarianceFamily>().unwrap(), f);
            assert_eq!(f.to_string().to_lowercase().parse::<CovarianceFamily>().unwrap(), f);
        }
        assert!("XYZ".parse::<CovarianceFamily>().is_err());
    }

    #[test]
    fn counts_for_paper_scale() {
        assert_eq!(CovarianceFamily::VEV.n_params(14, 30), 13 + 420 + 14 + 29 + 14 * 435);
        assert_eq!(CovarianceFamily::EII.n_params(1, 2), 3);
    }

    /// Stacked covariance entries as a function of an over-complete parameter vector.
    fn covariances(family: CovarianceFamily, k: usize, d: usize, theta: &[f64]) -> Vec<f64> {
        let skew = |p: &[f64]| {
            let mut s = DMatrix::zeros(d, d);
            let mut it = p.iter();
            for i in 0..d {
                for j in (i + 1)..d {
                    let v = *it.next().unwrap();
                    s[(i, j)] = v;
                    s[(j, i)] = -v;
                }
            }
            s.exp()
        };
        let sym = |p: &[f64]| {
            let mut a = DMatrix::<f64>::zeros(d, d);
            let mut it = p.iter();
            for i in 0..d {
                for j in i..d {
                    let v = *it.next().unwrap();
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            a
        };
        let nrot = d * (d - 1) / 2;
        let nsym = d * (d + 1) / 2;
        let base = DMatrix::<f64>::identity(d, d) * 3.0;
        let mats: Vec<DMatrix<f64>> = match family {
            CovarianceFamily::EII => (0..k).map(|_| DMatrix::identity(d, d) * theta[0].exp()).collect(),
            CovarianceFamily::VII => (0..k).map(|i| DMatrix::identity(d, d) * theta[i].exp()).collect(),
            CovarianceFamily::EEE => (0..k).map(|_| &base + sym(&theta[..nsym])).collect(),
            CovarianceFamily::VVV => (0..k)
                .map(|i| &base + sym(&theta[i * nsym..(i + 1) * nsym]))
                .collect(),
            CovarianceFamily::VEV => {
                // shape from d log-entries, normalized to det 1
                let logs = &theta[k..k + d];
                let m = logs.iter().sum::<f64>() / d as f64;
                let a = DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    logs.iter().enumerate().map(|(i, l)| (l - m + 0.3 * i as f64).exp()),
                ));
                (0..k)
                    .map(|i| {
                        let off = k + d + i * nrot;
                        let r = skew(&theta[off..off + nrot]) * skew(&vec![0.2 * (i + 1) as f64; nrot]);
                        &r * &a * r.transpose() * theta[i].exp()
                    })
                    .collect()
            }
        };
        mats.iter()
            .flat_map(|m| (0..d).flat_map(move |i| (i..d).map(move |j| m[(i, j)])))
            .collect()
    }

    fn jacobian_rank(family: CovarianceFamily, k: usize, d: usize) -> usize {
        let nrot = d * (d - 1) / 2;
        let nsym = d * (d + 1) / 2;
        let dim = match family {
            CovarianceFamily::EII => 1,
            CovarianceFamily::VII => k,
            CovarianceFamily::EEE => nsym,
            CovarianceFamily::VVV => k * nsym,
            CovarianceFamily::VEV => k + d + k * nrot,
        };
        let theta: Vec<f64> = (0..dim).map(|i| 0.1 * ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let f0 = covariances(family, k, d, &theta);
        let h = 1e-6;
        let mut jac = DMatrix::zeros(f0.len(), dim);
        for c in 0..dim {
            let mut tp = theta.clone();
            tp[c] += h;
            let mut tm = theta.clone();
            tm[c] -= h;
            let (fp, fm) = (covariances(family, k, d, &tp), covariances(family, k, d, &tm));
            for r in 0..f0.len() {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        jac.rank(1e-6)
    }

    #[test]
    fn parameter_counts_match_local_dimension() {
        for family in CovarianceFamily::ALL {
            for (k, d) in [(2, 2), (3, 3), (2, 4)] {
                assert_eq!(
                    jacobian_rank(family, k, d),
                    family.covariance_params(k, d),
                    "{family} k={k} d={d}"
                );
            }
        }
    }
}
