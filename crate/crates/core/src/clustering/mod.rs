//! Model-based clustering of coefficient curves.
//!
//! Gaussian mixtures are fitted by EM under a parameterized covariance family
//! (`Sigma_k = lambda_k D_k A_k D_k'`, in the volume/shape/orientation
//! decomposition), and the number of components and the family are chosen by
//! the largest `B = 2 log L - m log n`. Plain k-means is kept as a baseline and
//! as the EM initializer.

mod family;
mod gmm;
mod kmeans;
mod select;

use nalgebra::DMatrix;

pub use family::CovarianceFamily;
pub use gmm::{em_fit, EmOptions, MixtureModel};
pub use kmeans::{kmeans, KMeansResult};
pub use select::{select_model, BicRow, FitFailure, ModelSelection, BIC_HEADER};

use crate::{Error, Result};

/// Hard labels and posterior membership probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// One row of length `K` per point; rows sum to 1.
    pub responsibilities: Vec<Vec<f64>>,
}

impl ClusterAssignment {
    pub fn max_responsibility(&self, i: usize) -> f64 {
        self.responsibilities[i][self.labels[i]]
    }

    pub(crate) fn one_hot(labels: Vec<usize>, k: usize) -> Self {
        let responsibilities = labels
            .iter()
            .map(|&l| (0..k).map(|j| f64::from(u8::from(j == l))).collect())
            .collect();
        Self {
            labels,
            responsibilities,
        }
    }

    /// Writes `point_id,label,max_responsibility` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, ids: &[String], writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["point_id", "label", "max_responsibility"])?;
        for (i, id) in ids.iter().enumerate() {
            wtr.write_record([
                id.clone(),
                self.labels[i].to_string(),
                format!("{:?}", self.max_responsibility(i)),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Stacks points into an `n x d` matrix, checking they share one dimension.
pub(crate) fn to_matrix(points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidArgument("points must share a positive dimension".into()));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("points contain non-finite coordinates".into()));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| points[i][j]))
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&i, &j) in a.iter().zip(b) {
        table[i][j] += 1;
    }
    let pairs = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / pairs(n);
    let max = (rows + cols) / 2.0;
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ari_is_one_for_relabeled_partitions() {
        let a = [0, 0, 1, 1, 2, 2];
        let b = [2, 2, 0, 0, 1, 1];
        assert!((adjusted_rand_index(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ari_hand_value() {
        // sklearn.metrics.adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]);
        assert!((v - 0.571_428_571_428_571_5).abs() < 1e-12);
    }

    #[test]
    fn matrix_conversion_checks_shape() {
        assert!(to_matrix(&[]).is_err());
        assert!(to_matrix(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(to_matrix(&[vec![f64::NAN]]).is_err());
        assert_eq!(to_matrix(&[vec![1.0, 2.0]]).unwrap().ncols(), 2);
    }
}
