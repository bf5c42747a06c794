use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use super::family::CovarianceFamily;
use super::gmm::{em_fit_matrix, EmOptions, MixtureModel};
use super::{to_matrix, ClusterAssignment};
use crate::{Error, Result};

pub const BIC_HEADER: [&str; 5] = ["K", "family", "bic", "loglik", "converged"];

#[derive(Debug, Clone, PartialEq)]
pub struct BicRow {
    pub k: usize,
    pub family: CovarianceFamily,
    pub bic: f64,
    pub loglik: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitFailure {
    pub k: usize,
    pub family: CovarianceFamily,
    pub reason: String,
}

/// Outcome of a BIC scan over component counts and covariance families.
#[derive(Debug, Clone)]
pub struct ModelSelection {
    pub best: MixtureModel,
    pub assignment: ClusterAssignment,
    /// Successful fits ordered by `(K, family)`.
    pub table: Vec<BicRow>,
    pub failures: Vec<FitFailure>,
}

impl ModelSelection {
    /// Writes the BIC table; failed fits appear with empty `bic` and `loglik`.
    pub fn write_bic_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(BIC_HEADER)?;
        let mut rows: Vec<(usize, CovarianceFamily, [String; 3])> = self
            .table
            .iter()
            .map(|r| {
                (
                    r.k,
                    r.family,
                    [format!("{:?}", r.bic), format!("{:?}", r.loglik), r.converged.to_string()],
                )
            })
            .collect();
        rows.extend(
            self.failures
                .iter()
                .map(|f| (f.k, f.family, [String::new(), String::new(), "failed".to_owned()])),
        );
        rows.sort_by_key(|r| (r.0, r.1));
        for (k, family, [bic, loglik, converged]) in rows {
            wtr.write_record([k.to_string(), family.to_string(), bic, loglik, converged])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fits every `(K, family)` pair and keeps the one with the largest BIC.
pub fn select_model(
    points: &[Vec<f64>],
    k_range: RangeInclusive<usize>,
    families: &[CovarianceFamily],
    seed: u64,
    options: &EmOptions,
) -> Result<ModelSelection> {
    if k_range.is_empty() || families.is_empty() {
        return Err(Error::InvalidArgument("empty K range or family set".into()));
    }
    let x = to_matrix(points)?;
    let pairs: Vec<(usize, CovarianceFamily)> = k_range
        .flat_map(|k| families.iter().map(move |&f| (k, f)))
        .collect();
    let fits: Vec<_> = pairs
        .par_iter()
        .map(|&(k, family)| (k, family, em_fit_matrix(&x, k, family, seed, options)))
        .collect();

    let mut table = Vec::new();
    let mut failures = Vec::new();
    let mut best: Option<(MixtureModel, ClusterAssignment)> = None;
    for (k, family, fit) in fits {
        match fit {
            Ok((model, assignment)) => {
                table.push(BicRow {
                    k,
                    family,
                    bic: model.bic,
                    loglik: model.loglik,
                    converged: model.converged,
                });
                // ties keep the earlier (simpler) pair
                if best.as_ref().is_none_or(|(b, _)| model.bic > b.bic) {
                    best = Some((model, assignment));
                }
            }
            Err(e) => failures.push(FitFailure {
                k,
                family,
                reason: e.to_string(),
            }),
        }
    }
    match best {
        Some((best, assignment)) => Ok(ModelSelection {
            best,
            assignment,
            table,
            failures,
        }),
        None => Err(Error::AllFitsFailed(
            failures
                .iter()
                .map(|f| format!("K={} {}: {}", f.k, f.family, f.reason))
                .collect::<Vec<_>>()
                .join("\n"),
        )),
    }
}
