//! Per-material Gaussian mixture likelihoods.
//!
//! Full-covariance mixtures fitted with EM (k-means++ initialization,
//! diagonal regularization each M-step), component count chosen by the
//! point where held-out likelihood growth slows down, densities evaluated
//! in log space throughout.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::numeric::{derive_seed, logsumexp};

/// Default knee threshold: growth below this relative improvement stops
/// adding components.
pub const DEFAULT_TAU_KNEE: f64 = 0.02;
/// Default held-out fraction for component selection.
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

/// EM fitting knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Relative log-likelihood improvement below which EM stops.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Covariance regularization as a fraction of the mean data variance
    /// (absolute fallback when the data has no variance).
    pub eps_cov_scale: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tol: 1e-7,
            max_iter: 500,
            eps_cov_scale: 1e-6,
        }
    }
}

/// A full-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    /// Component weights; non-negative, summing to 1.
    pub weights: Vec<f64>,
    /// Component means.
    pub means: Vec<DVector<f64>>,
    /// Component covariances (symmetric positive definite).
    pub covariances: Vec<DMatrix<f64>>,
}

/// One material's likelihood models over both feature spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub name: String,
    pub vib_gmm: Gmm,
    pub thermal_gmm: Gmm,
}

/// EM result with the per-iteration training log-likelihood trace.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub gmm: Gmm,
    /// Total training log-likelihood recorded at each E-step.
    pub log_likelihoods: Vec<f64>,
}

impl Gmm {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    /// Check structural invariants (simplex weights, consistent
    /// dimensions, factorizable covariances).
    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(Error::Shape(format!(
                "mixture with {k} weights, {} means, {} covariances",
                self.means.len(),
                self.covariances.len()
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!(
                "mixture weights must be a simplex vector; sum = {sum}"
            )));
        }
        let d = self.dim();
        for (i, (m, c)) in self.means.iter().zip(&self.covariances).enumerate() {
            if m.len() != d || c.nrows() != d || c.ncols() != d {
                return Err(Error::Shape(format!(
                    "component {i}: mean of dim {} with {}x{} covariance (expected {d})",
                    m.len(),
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        self.prepare().map(|_| ())
    }

    /// Precompute per-component Cholesky factors for repeated density
    /// evaluation.
    pub fn prepare(&self) -> Result<PreparedGmm> {
        let d = self.dim();
        let mut comps = Vec::with_capacity(self.component_count());
        for (i, (mean, cov)) in self.means.iter().zip(&self.covariances).enumerate() {
            let chol = nalgebra::Cholesky::new(cov.clone()).ok_or_else(|| {
                Error::Degenerate(format!("component {i}: covariance is not positive definite"))
            })?;
            let l = chol.unpack();
            let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
                - l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            comps.push(PreparedComponent {
                mean: mean.clone(),
                chol_l: l,
                log_norm,
            });
        }
        Ok(PreparedGmm {
            log_weights: self.weights.iter().map(|w| w.ln()).collect(),
            comps,
            dim: d,
        })
    }
}

struct PreparedComponent {
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    log_norm: f64,
}

impl PreparedComponent {
    /// log N(x; mean, L L^T).
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let mut diff = x - &self.mean;
        // Solve L y = diff in place; L is lower triangular from Cholesky,
        // so this always succeeds.
        self.chol_l.solve_lower_triangular_mut(&mut diff);
        self.log_norm - 0.5 * diff.norm_squared()
    }
}

/// A mixture with cached factorizations, ready for density queries.
pub struct PreparedGmm {
    log_weights: Vec<f64>,
    comps: Vec<PreparedComponent>,
    dim: usize,
}

impl PreparedGmm {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// log p(x) via log-sum-exp over components.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "point of dim {} against mixture of dim {}",
                x.len(),
                self.dim
            )));
        }
        let terms: Vec<f64> = self
            .comps
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_density(x))
            .collect();
        Ok(logsumexp(&terms))
    }
}

/// log p(x) under a mixture, never formed in probability space.
pub fn log_likelihood(gmm: &Gmm, x: &DVector<f64>) -> Result<f64> {
    gmm.prepare()?.log_density(x)
}

/// Regularization floor used for a dataset: `eps_cov_scale` times the
/// mean per-dimension population variance, falling back to the scale
/// itself for zero-variance data.
fn epsilon_cov(data: &[DVector<f64>], scale: f64) -> f64 {
    let d = data[0].len();
    let n = data.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in data {
        mean += x;
    }
    mean /= n;
    let mut total = 0.0;
    for x in data {
        total += (x - &mean).norm_squared();
    }
    let mean_var = total / (n * d as f64);
    if mean_var.is_finite() && mean_var > 0.0 {
        scale * mean_var
    } else {
        scale
    }
}

fn population_covariance(data: &[DVector<f64>]) -> DMatrix<f64> {
    let d = data[0].len();
    let n = data.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in data {
        mean += x;
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in data {
        let diff = x - &mean;
        cov.syger(1.0 / n, &diff, &diff, 1.0);
    }
    cov
}

/// k-means++ center selection (indices into `data`).
fn kmeanspp_centers(data: &[DVector<f64>], k: usize, rng: &mut ChaCha20Rng) -> Vec<usize> {
    let n = data.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = data
        .iter()
        .map(|x| (x - &data[centers[0]]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            // All mass sits on existing centers; take the first unused
            // point so the fit stays deterministic.
            (0..n).find(|i| !centers.contains(i)).unwrap_or(0)
        };
        centers.push(idx);
        for (i, x) in data.iter().enumerate() {
            let nd = (x - &data[idx]).norm_squared();
            if nd < d2[i] {
                d2[i] = nd;
            }
        }
    }
    centers
}

/// Fit a k-component full-covariance mixture with EM (default settings).
pub fn em_fit(data: &[DVector<f64>], k: usize, seed: u64) -> Result<Gmm> {
    Ok(em_fit_with(data, k, seed, &EmConfig::default())?.gmm)
}

/// Fit with explicit settings, returning the log-likelihood trace.
pub fn em_fit_with(
    data: &[DVector<f64>],
    k: usize,
    seed: u64,
    cfg: &EmConfig,
) -> Result<EmFit> {
    if k == 0 {
        return Err(Error::Parameter("component count must be positive".into()));
    }
    if data.len() < k {
        return Err(Error::Parameter(format!(
            "{} data points cannot support {k} components",
            data.len()
        )));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|x| x.len() != d) {
        return Err(Error::Shape("training vectors must share a positive dimension".into()));
    }

    let n = data.len();
    let eps = epsilon_cov(data, cfg.eps_cov_scale);
    let global_cov = {
        let mut c = population_covariance(data);
        for i in 0..d {
            c[(i, i)] += eps;
        }
        c
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let centers = kmeanspp_centers(data, k, &mut rng);
    let mut weights = vec![1.0 / k as f64; k];
    let mut means: Vec<DVector<f64>> = centers.iter().map(|&i| data[i].clone()).collect();
    let mut covs: Vec<DMatrix<f64>> = vec![global_cov.clone(); k];

    let mut trace = Vec::new();
    let mut resp = DMatrix::zeros(n, k);
    let mut point_ll = vec![0.0; n];

    for _ in 0..cfg.max_iter {
        // E-step.
        let prepared = Gmm {
            weights: weights.clone(),
            means: means.clone(),
            covariances: covs.clone(),
        }
        .prepare()?;
        let mut ll = 0.0;
        let mut terms = vec![0.0; k];
        for (i, x) in data.iter().enumerate() {
            for (j, (c, lw)) in prepared
                .comps
                .iter()
                .zip(&prepared.log_weights)
                .enumerate()
            {
                terms[j] = lw + c.log_density(x);
            }
            let lse = logsumexp(&terms);
            point_ll[i] = lse;
            ll += lse;
            for j in 0..k {
                resp[(i, j)] = (terms[j] - lse).exp();
            }
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() <= cfg.tol * ll.abs().max(1.0));
        trace.push(ll);
        if converged {
            break;
        }

        // M-step.
        let mut scratch = vec![0.0; d];
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[(i, j)]).sum();
            if nk < 1e-10 {
                // Component lost all responsibility: reseed it at the
                // point the mixture currently explains worst.
                let worst = (0..n)
                    .min_by(|&a, &b| point_ll[a].partial_cmp(&point_ll[b]).unwrap())
                    .unwrap();
                means[j] = data[worst].clone();
                covs[j] = global_cov.clone();
                weights[j] = 1.0 / n as f64;
                continue;
            }
            weights[j] = nk / n as f64;
            let mut mean = DVector::zeros(d);
            for (i, x) in data.iter().enumerate() {
                mean.axpy(resp[(i, j)], x, 1.0);
            }
            mean /= nk;
            let mut cov = DMatrix::zeros(d, d);
            for (i, x) in data.iter().enumerate() {
                let r = resp[(i, j)];
                if r == 0.0 {
                    continue;
                }
                for a in 0..d {
                    scratch[a] = x[a] - mean[a];
                }
                for a in 0..d {
                    let ra = r * scratch[a];
                    for b in 0..=a {
                        cov[(a, b)] += ra * scratch[b];
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    cov[(a, b)] /= nk;
                    cov[(b, a)] = cov[(a, b)];
                }
                cov[(a, a)] = cov[(a, a)] / nk + eps;
            }
            means[j] = mean;
            covs[j] = cov;
        }
        let wsum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= wsum);
    }

    Ok(EmFit {
        gmm: Gmm {
            weights,
            means,
            covariances: covs,
        },
        log_likelihoods: trace,
    })
}

/// Pick the component count at which held-out likelihood growth slows
/// below the default knee threshold.
pub fn select_components(
    data: &[DVector<f64>],
    k_max: usize,
    holdout_fraction: f64,
    seed: u64,
) -> Result<usize> {
    select_components_with(
        data,
        k_max,
        holdout_fraction,
        DEFAULT_TAU_KNEE,
        seed,
        &EmConfig::default(),
    )
}

/// Component selection with explicit knee threshold and EM settings.
///
/// Fits k = 1..k_max on a seeded train split, scores mean log-likelihood
/// on the held-out split, and returns the last k before the relative
/// improvement drops below `tau_knee`.
pub fn select_components_with(
    data: &[DVector<f64>],
    k_max: usize,
    holdout_fraction: f64,
    tau_knee: f64,
    seed: u64,
    cfg: &EmConfig,
) -> Result<usize> {
    if k_max == 0 {
        return Err(Error::Parameter("k_max must be at least 1".into()));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "holdout fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    if k_max == 1 {
        return Ok(1);
    }
    let n = data.len();
    let n_hold = ((n as f64 * holdout_fraction).round() as usize).max(1);
    let n_train = n.saturating_sub(n_hold);
    if n_train < k_max {
        return Err(Error::Parameter(format!(
            "insufficient data for component selection: {n} points, {n_train} train after holdout"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0x5e1ec7));
    order.shuffle(&mut rng);
    let train: Vec<DVector<f64>> = order[..n_train].iter().map(|&i| data[i].clone()).collect();
    let holdout: Vec<&DVector<f64>> = order[n_train..].iter().map(|&i| &data[i]).collect();

    let mut prev: Option<f64> = None;
    for k in 1..=k_max {
        let fit = em_fit_with(&train, k, derive_seed(seed, k as u64), cfg)?;
        let prepared = fit.gmm.prepare()?;
        let mut total = 0.0;
        for x in &holdout {
            total += prepared.log_density(x)?;
        }
        let score = total / holdout.len() as f64;
        if let Some(prev_score) = prev {
            let rel = (score - prev_score) / prev_score.abs().max(1e-9);
            if rel < tau_knee {
                return Ok(k - 1);
            }
        }
        prev = Some(score);
    }
    Ok(k_max)
}
