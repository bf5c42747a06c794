use nalgebra::DMatrix;
use rand::Rng;

use super::{to_matrix, ClusterAssignment};
use crate::rng::{self, Stream, StreamRng};
use crate::{Error, Result};

const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// `K` rows of dimension `d`.
    pub centers: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansResult {
    pub fn wcss(&self) -> f64 {
        *self.wcss_history.last().expect("at least one iteration")
    }
}

fn sq_dist(x: &DMatrix<f64>, i: usize, c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(j, cj)| (x[(i, j)] - cj).powi(2)).sum()
}

fn distinct_points(x: &DMatrix<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = (0..x.nrows())
        .map(|i| x.row(i).iter().map(|v| v.to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

fn plus_plus(x: &DMatrix<f64>, k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let row = |i: usize| x.row(i).iter().copied().collect::<Vec<f64>>();
    let mut centers = vec![row(rng.gen_range(0..n))];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(row(pick));
        let c = centers.last().expect("just pushed");
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, c));
        }
    }
    centers
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Runs until the assignment stops changing or for 300 iterations. An empty
/// cluster is re-seeded at the point farthest from its current center.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    let x = to_matrix(points)?;
    kmeans_matrix(&x, k, seed)
}

pub(crate) fn kmeans_matrix(x: &DMatrix<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    let (n, d) = x.shape();
    if k == 0 || k > distinct_points(x) {
        return Err(Error::InvalidArgument(format!(
            "K = {k} but only {} distinct points",
            distinct_points(x)
        )));
    }
    let mut rng = rng::stream(seed, Stream::ClusterInit, 0);
    let mut centers = plus_plus(x, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut wcss_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(x, i, &centers[a]).total_cmp(&sq_dist(x, i, &centers[b])))
                .expect("k > 0");
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        // Re-seed empty clusters from the worst-served point.
        loop {
            let mut counts = vec![0usize; k];
            labels.iter().for_each(|&l| counts[l] += 1);
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    sq_dist(x, a, &centers[labels[a]]).total_cmp(&sq_dist(x, b, &centers[labels[b]]))
                })
                .expect("more distinct points than clusters");
            labels[far] = empty;
            centers[empty] = x.row(far).iter().copied().collect();
            changed = true;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for j in 0..d {
                sums[l][j] += x[(i, j)];
            }
        }
        for c in 0..k {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        wcss_history.push((0..n).map(|i| sq_dist(x, i, &centers[labels[i]])).sum());
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(KMeansResult {
        assignment: ClusterAssignment::one_hot(labels, k),
        centers,
        wcss_history,
        iterations,
        converged,
    })
}
