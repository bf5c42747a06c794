use nalgebra::{DMatrix, DVector};

use super::family::CovarianceFamily;
use super::kmeans::kmeans_matrix;
use super::{to_matrix, ClusterAssignment};
use crate::rng::{derive_seed, Stream};
use crate::{Error, Result};

/// Tuning of [`em_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    /// Independent k-means initializations; the best final log-likelihood wins.
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the log-likelihood gains less than `tol * |loglik|`.
    pub tol: f64,
    /// Convergence of the shared-shape inner iteration (VEV).
    pub shape_tol: f64,
    /// Covariance eigenvalues are floored at `floor_factor * trace(S) / d`,
    /// `S` being the sample covariance of the data.
    pub floor_factor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 500,
            tol: 1e-8,
            shape_tol: 1e-6,
            floor_factor: 1e-8,
        }
    }
}

/// A fitted Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub family: CovarianceFamily,
    pub k: usize,
    pub d: usize,
    /// Number of points the model was fitted to.
    pub n: usize,
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub loglik: f64,
    /// `2 loglik - m log n`; larger is better.
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood at every EM iteration of the retained run.
    pub loglik_trace: Vec<f64>,
}

impl MixtureModel {
    pub fn n_params(&self) -> usize {
        self.family.n_params(self.k, self.d)
    }

    pub fn bic_from(loglik: f64, m: usize, n: usize) -> f64 {
        2.0 * loglik - m as f64 * (n as f64).ln()
    }

    /// Posterior memberships and total log-likelihood of `points` under the model.
    pub fn assign(&self, points: &[Vec<f64>]) -> Result<(ClusterAssignment, f64)> {
        let x = to_matrix(points)?;
        if x.ncols() != self.d {
            return Err(Error::InvalidArgument("point dimension differs from the model".into()));
        }
        let params = Params {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covariances: self.covariances.clone(),
            shape: None,
        };
        let (resp, loglik) = e_step(&x, &params)?;
        Ok((assignment_from(&resp), loglik))
    }

    /// Normalized shape of component `c`: eigenvalues of `Sigma_c / det(Sigma_c)^(1/d)`, descending.
    pub fn shape(&self, c: usize) -> Vec<f64> {
        let eig = self.covariances[c].clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let log_det: f64 = vals.iter().map(|v| v.ln()).sum();
        let scale = (log_det / self.d as f64).exp();
        vals.iter().map(|v| v / scale).collect()
    }

    /// Same mixture with components reordered so that new component `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MixtureModel {
        let mut out = self.clone();
        out.weights = perm.iter().map(|&p| self.weights[p]).collect();
        out.means = perm.iter().map(|&p| self.means[p].clone()).collect();
        out.covariances = perm.iter().map(|&p| self.covariances[p].clone()).collect();
        out
    }
}

#[derive(Debug, Clone)]
struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    /// Shared VEV shape, descending with unit product.
    shape: Option<Vec<f64>>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log responsibilities are returned exponentiated, rows summing to 1.
fn e_step(x: &DMatrix<f64>, params: &Params) -> Result<(DMatrix<f64>, f64)> {
    let (n, d) = x.shape();
    let k = params.weights.len();
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut log_dens = DMatrix::zeros(n, k);
    for c in 0..k {
        let chol = params.covariances[c].clone().cholesky().ok_or_else(|| Error::DegenerateComponent {
            component: c,
            reason: "covariance is not positive definite".into(),
        })?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let constant = params.weights[c].ln() - 0.5 * (d as f64 * log_2pi + log_det);
        let centred = DMatrix::from_fn(d, n, |j, i| x[(i, j)] - params.means[c][j]);
        let solved = l
            .solve_lower_triangular(&centred)
            .ok_or_else(|| Error::DegenerateComponent {
                component: c,
                reason: "singular Cholesky factor".into(),
            })?;
        for i in 0..n {
            log_dens[(i, c)] = constant - 0.5 * solved.column(i).norm_squared();
        }
    }
    let mut loglik = 0.0;
    let mut row = vec![0.0; k];
    for i in 0..n {
        for c in 0..k {
            row[c] = log_dens[(i, c)];
        }
        let lse = log_sum_exp(&row);
        loglik += lse;
        for c in 0..k {
            log_dens[(i, c)] = (row[c] - lse).exp();
        }
        // renormalize so each row sums to 1 to rounding
        let s: f64 = (0..k).map(|c| log_dens[(i, c)]).sum();
        for c in 0..k {
            log_dens[(i, c)] /= s;
        }
    }
    if !loglik.is_finite() {
        return Err(Error::DegenerateComponent {
            component: 0,
            reason: "log-likelihood is not finite".into(),
        });
    }
    Ok((log_dens, loglik))
}

fn floor_eigenvalues(s: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = s.symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= floor) {
        let sym = (&eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues)) * eig.eigenvectors.transpose();
        return (&sym + sym.transpose()) * 0.5;
    }
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let sym = (&eig.eigenvectors * DMatrix::from_diagonal(&vals)) * eig.eigenvectors.transpose();
    (&sym + sym.transpose()) * 0.5
}

fn m_step(
    x: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    family: CovarianceFamily,
    previous_shape: Option<&[f64]>,
    floor: f64,
    options: &EmOptions,
) -> Result<Params> {
    let (n, d) = x.shape();
    let k = resp.ncols();
    let nk: Vec<f64> = (0..k).map(|c| resp.column(c).sum()).collect();
    let min_mass = 1e-8 * n as f64;
    if let Some(c) = nk.iter().position(|&m| m < min_mass.max(1e-300)) {
        return Err(Error::DegenerateComponent {
            component: c,
            reason: format!("component mass {:e}", nk[c]),
        });
    }
    let weights: Vec<f64> = nk.iter().map(|m| m / n as f64).collect();
    let means: Vec<DVector<f64>> = (0..k)
        .map(|c| (x.transpose() * resp.column(c)) / nk[c])
        .collect();
    let scatter: Vec<DMatrix<f64>> = (0..k)
        .map(|c| {
            let weighted = DMatrix::from_fn(n, d, |i, j| resp[(i, c)].sqrt() * (x[(i, j)] - means[c][j]));
            let w = weighted.transpose() * &weighted;
            (&w + w.transpose()) * 0.5
        })
        .collect();

    let mut shape = None;
    let covariances: Vec<DMatrix<f64>> = match family {
        CovarianceFamily::EII => {
            let total: f64 = scatter.iter().map(|w| w.trace()).sum();
            let lambda = (total / (n * d) as f64).max(floor);
            vec![DMatrix::identity(d, d) * lambda; k]
        }
        CovarianceFamily::VII => (0..k)
            .map(|c| DMatrix::identity(d, d) * (scatter[c].trace() / (nk[c] * d as f64)).max(floor))
            .collect(),
        CovarianceFamily::EEE => {
            let pooled = scatter.iter().fold(DMatrix::zeros(d, d), |acc, w| acc + w) / n as f64;
            vec![floor_eigenvalues(pooled, floor); k]
        }
        CovarianceFamily::VVV => (0..k)
            .map(|c| floor_eigenvalues(&scatter[c] / nk[c], floor))
            .collect(),
        CovarianceFamily::VEV => {
            let (covs, a) = vev_covariances(&scatter, &nk, previous_shape, floor, options.shape_tol);
            shape = Some(a);
            covs
        }
    };
    Ok(Params {
        weights,
        means,
        covariances,
        shape,
    })
}

/// Shared-shape, varying volume and orientation update: alternate the
/// volumes `lambda_k = tr(Omega_k A^-1) / (d n_k)` and the shape
/// `A = sum_k Omega_k / lambda_k` normalized to unit determinant, where
/// `W_k = L_k Omega_k L_k'` with eigenvalues in descending order.
fn vev_covariances(
    scatter: &[DMatrix<f64>],
    nk: &[f64],
    previous_shape: Option<&[f64]>,
    floor: f64,
    tol: f64,
) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let k = scatter.len();
    let d = scatter[0].nrows();
    let mut orientations = Vec::with_capacity(k);
    let mut omegas: Vec<Vec<f64>> = Vec::with_capacity(k);
    for c in 0..k {
        let eig = scatter[c].clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let vecs = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
        omegas.push(order.iter().map(|&j| eig.eigenvalues[j].max(floor * nk[c])).collect());
        orientations.push(vecs);
    }
    let normalize = |a: Vec<f64>| -> Vec<f64> {
        let g = (a.iter().map(|v| v.ln()).sum::<f64>() / d as f64).exp();
        a.into_iter().map(|v| v / g).collect()
    };
    let volumes = |a: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|c| omegas[c].iter().zip(a).map(|(w, a)| w / a).sum::<f64>() / (d as f64 * nk[c]))
            .collect()
    };
    let mut a = match previous_shape {
        Some(prev) if prev.len() == d => prev.to_vec(),
        _ => normalize((0..d).map(|j| (0..k).map(|c| omegas[c][j] / nk[c]).sum()).collect()),
    };
    let mut lambda = volumes(&a);
    for _ in 0..200 {
        let next = normalize(
            (0..d)
                .map(|j| (0..k).map(|c| omegas[c][j] / lambda[c]).sum())
                .collect(),
        );
        let change = next
            .iter()
            .zip(&a)
            .map(|(x, y)| (x - y).abs() / y.abs())
            .fold(0.0, f64::max);
        a = next;
        lambda = volumes(&a);
        if change < tol {
            break;
        }
    }
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let covs = (0..k)
        .map(|c| {
            let vol = lambda[c].max(floor / a_min);
            let diag = DMatrix::from_diagonal(&DVector::from_iterator(d, a.iter().map(|v| v * vol)));
            let s = &orientations[c] * diag * orientations[c].transpose();
            (&s + s.transpose()) * 0.5
        })
        .collect();
    (covs, a)
}

fn assignment_from(resp: &DMatrix<f64>) -> ClusterAssignment {
    let (n, k) = resp.shape();
    let responsibilities: Vec<Vec<f64>> = (0..n).map(|i| (0..k).map(|c| resp[(i, c)]).collect()).collect();
    let labels = responsibilities
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(c, _)| c)
                .expect("k > 0")
        })
        .collect();
    ClusterAssignment {
        labels,
        responsibilities,
    }
}

fn data_floor(x: &DMatrix<f64>, factor: f64) -> f64 {
    let (n, d) = x.shape();
    let trace: f64 = (0..d)
        .map(|j| {
            let col = x.column(j);
            let m = col.mean();
            col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n.max(2).saturating_sub(1) as f64
        })
        .sum();
    let floor = factor * trace / d as f64;
    if floor > 0.0 {
        floor
    } else {
        factor
    }
}

struct Run {
    params: Params,
    resp: DMatrix<f64>,
    loglik: f64,
    trace: Vec<f64>,
    converged: bool,
}

fn run_em(
    x: &DMatrix<f64>,
    initial: &DMatrix<f64>,
    family: CovarianceFamily,
    floor: f64,
    options: &EmOptions,
) -> Result<Run> {
    let mut params = m_step(x, initial, family, None, floor, options)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last: Option<(DMatrix<f64>, f64)> = None;
    for _ in 0..options.max_iter {
        let (resp, loglik) = e_step(x, &params)?;
        trace.push(loglik);
        let done = match last {
            Some((_, prev)) => loglik - prev < options.tol * loglik.abs(),
            None => false,
        };
        last = Some((resp, loglik));
        if done {
            converged = true;
            break;
        }
        let (resp, _) = last.as_ref().expect("just set");
        params = m_step(x, resp, family, params.shape.as_deref(), floor, options)?;
    }
    let (resp, loglik) = last.expect("max_iter > 0");
    Ok(Run {
        params,
        resp,
        loglik,
        trace,
        converged,
    })
}

/// Fits a `k`-component Gaussian mixture under `family` by EM.
///
/// Each restart seeds EM with a hard k-means partition; the run with the
/// largest final log-likelihood is kept.
pub fn em_fit(
    points: &[Vec<f64>],
    k: usize,
    family: CovarianceFamily,
    seed: u64,
    options: &EmOptions,
) -> Result<(MixtureModel, ClusterAssignment)> {
    let x = to_matrix(points)?;
    em_fit_matrix(&x, k, family, seed, options)
}

pub(crate) fn em_fit_matrix(
    x: &DMatrix<f64>,
    k: usize,
    family: CovarianceFamily,
    seed: u64,
    options: &EmOptions,
) -> Result<(MixtureModel, ClusterAssignment)> {
    let (n, d) = x.shape();
    if k == 0 || n < k * (d + 1) {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot support {k} components in dimension {d}"
        )));
    }
    if options.max_iter == 0 || options.restarts == 0 {
        return Err(Error::InvalidArgument("max_iter and restarts must be positive".into()));
    }
    let floor = data_floor(x, options.floor_factor);
    let mut best: Option<Run> = None;
    let mut last_err = None;
    for restart in 0..options.restarts {
        let init = kmeans_matrix(x, k, derive_seed(seed, Stream::ClusterInit, restart as u64))?;
        let hard = DMatrix::from_fn(n, k, |i, c| f64::from(u8::from(init.assignment.labels[i] == c)));
        match run_em(x, &hard, family, floor, options) {
            Ok(run) => {
                if best.as_ref().is_none_or(|b| run.loglik > b.loglik) {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let run = match best {
        Some(run) => run,
        None => return Err(last_err.expect("at least one restart")),
    };
    let m = family.n_params(k, d);
    let model = MixtureModel {
        family,
        k,
        d,
        n,
        weights: run.params.weights,
        means: run.params.means,
        covariances: run.params.covariances,
        loglik: run.loglik,
        bic: MixtureModel::bic_from(run.loglik, m, n),
        converged: run.converged,
        iterations: run.trace.len(),
        loglik_trace: run.trace,
    };
    Ok((model, assignment_from(&run.resp)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::adjusted_rand_index;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sample(mean: &[f64], cov: &DMatrix<f64>, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let l = cov.clone().cholesky().unwrap().l();
        (0..count)
            .map(|_| {
                let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| StandardNormal.sample(rng)));
                let v = &l * z;
                mean.iter().zip(v.iter()).map(|(m, e)| m + e).collect()
            })
            .collect()
    }

    fn rotation(deg: f64) -> DMatrix<f64> {
        let t = deg.to_radians();
        DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    pub(crate) fn vev_mixture(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        let spec = [([0.0, 0.0], 1.0, 0.0), ([12.0, 0.0], 2.0, 45.0), ([0.0, 12.0], 4.0, 90.0)];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, (mean, vol, deg)) in spec.iter().enumerate() {
            let r = rotation(*deg);
            let cov = (&r * &a * r.transpose()) * *vol;
            pts.extend(sample(mean, &cov, 1000, &mut rng));
            truth.extend(std::iter::repeat_n(c, 1000));
        }
        (pts, truth)
    }

    #[test]
    fn single_spherical_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = sample(&[1.0, -2.0], &(DMatrix::identity(2, 2) * 4.0), 2000, &mut rng);
        let (model, assignment) = em_fit(&pts, 1, CovarianceFamily::EII, 0, &EmOptions::default()).unwrap();
        let se = 2.0 / (2000f64).sqrt();
        assert!((model.means[0][0] - 1.0).abs() < 3.0 * se);
        assert!((model.means[0][1] + 2.0).abs() < 3.0 * se);
        assert!((model.covariances[0][(0, 0)] - 4.0).abs() < 0.3);
        assert_eq!(model.covariances[0][(0, 1)], 0.0);
        assert!(assignment.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn vev_shares_shape_and_recovers_labels() {
        let (pts, truth) = vev_mixture(10);
        let (model, assignment) = em_fit(&pts, 3, CovarianceFamily::VEV, 1, &EmOptions::default()).unwrap();
        let s0 = model.shape(0);
        for c in 1..3 {
            for (a, b) in model.shape(c).iter().zip(&s0) {
                assert!((a - b).abs() < 1e-4, "component {c}");
            }
        }
        // true shape diag(4, 1)/2
        assert!((s0[0] - 2.0).abs() < 0.2 && (s0[1] - 0.5).abs() < 0.05, "{s0:?}");
        assert!(adjusted_rand_index(&assignment.labels, &truth) >= 0.95);
    }

    #[test]
    fn loglik_is_monotone() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let mut pts = sample(&[0.0, 0.0], &(DMatrix::identity(2, 2)), 60, &mut rng);
            pts.extend(sample(&[2.5, 1.0], &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]), 60, &mut rng));
            let family = CovarianceFamily::ALL[seed as usize % 5];
            let opts = EmOptions {
                restarts: 1,
                ..EmOptions::default()
            };
            let (model, _) = em_fit(&pts, 2 + seed as usize % 2, family, seed, &opts).unwrap();
            for w in model.loglik_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{family} seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn responsibilities_are_normalized_and_bic_consistent() {
        let (pts, _) = vev_mixture(2);
        for family in CovarianceFamily::ALL {
            let (model, assignment) = em_fit(&pts, 3, family, 3, &EmOptions::default()).unwrap();
            for (row, &l) in assignment.responsibilities.iter().zip(&assignment.labels) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert!(row.iter().all(|&p| p <= row[l]));
            }
            assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert_eq!(model.bic, MixtureModel::bic_from(model.loglik, model.n_params(), pts.len()));
            for cov in &model.covariances {
                assert!(cov.clone().symmetric_eigen().eigenvalues.min() > 0.0);
            }
        }
    }

    #[test]
    fn relabeling_leaves_fit_unchanged() {
        let (pts, _) = vev_mixture(3);
        let (model, assignment) = em_fit(&pts, 3, CovarianceFamily::VVV, 0, &EmOptions::default()).unwrap();
        let perm = [2, 0, 1];
        let permuted = model.permuted(&perm);
        let (a1, ll1) = model.assign(&pts).unwrap();
        let (a2, ll2) = permuted.assign(&pts).unwrap();
        assert!((ll1 - ll2).abs() < 1e-9 * ll1.abs());
        assert!((ll1 - model.loglik).abs() < 1e-9 * ll1.abs());
        assert_eq!(a1.labels, assignment.labels);
        assert!((adjusted_rand_index(&a1.labels, &a2.labels) - 1.0).abs() < 1e-12);
        for i in 0..pts.len() {
            assert_eq!(perm[a2.labels[i]], a1.labels[i]);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0], vec![3.0, 1.0], vec![0.5, 0.5]];
        assert!(em_fit(&pts, 2, CovarianceFamily::VVV, 0, &EmOptions::default()).is_err());
    }
}
