//! PCA whitening with correlated-feature pruning.
//!
//! Fitting runs four stages: replace near-duplicate features with seeded
//! noise, center, form the covariance `Σ = (1/N) X̂ᵀX̂`, and
//! eigendecompose `Σ = V Λ Vᵀ`. The whitening matrix is `W = Λ^{-1/2} Vᵀ`
//! with inverse `W⁻¹ = V Λ^{1/2}`; a sample is whitened by `y = W (x − μ)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

/// Empirical covariance with divisor `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub sigma: DMatrix<f64>,
    pub n_samples: usize,
}

/// Result of [`prune_correlated_features`].
#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub pruned: EmbeddingMatrix,
    /// Replaced feature indices, ascending.
    pub dropped: Vec<usize>,
    /// Subset of `dropped` whose variance was zero, so their correlation was
    /// undefined.
    pub zero_variance: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Absolute correlation above which the higher-indexed feature of a pair
    /// is replaced by noise.
    pub tau: f64,
    pub seed: u64,
    /// Variance of the replacement noise.
    pub noise_variance: f64,
    /// Eigenvalues are clamped below at `eig_floor * λ_max`.
    pub eig_floor: f64,
    /// Timestamp recorded in the model; the current time when `None`.
    pub created_utc: Option<String>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tau: 0.999,
            seed: 0,
            noise_variance: 0.1,
            eig_floor: 1e-10,
            created_utc: None,
        }
    }
}

/// A fitted whitening transform. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningModel {
    mean: DVector<f64>,
    w: DMatrix<f64>,
    w_inv: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    tau: f64,
    dropped_features: Vec<usize>,
    zero_variance_features: Vec<usize>,
    noise_seed: u64,
    noise_variance: f64,
    eig_floor: f64,
    n_clamped: usize,
    n_fit_samples: usize,
    created_utc: String,
}

/// Max-abs deviation of `W · W⁻¹` from the identity that a model may have.
pub const INVERSE_TOLERANCE: f64 = 1e-8;

impl WhiteningModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn w_inv(&self) -> &DMatrix<f64> {
        &self.w_inv
    }

    /// Eigenvalues of the fit covariance, descending, after clamping.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dropped_features(&self) -> &[usize] {
        &self.dropped_features
    }

    pub fn zero_variance_features(&self) -> &[usize] {
        &self.zero_variance_features
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn eig_floor(&self) -> f64 {
        self.eig_floor
    }

    /// How many eigenvalues were raised to the floor.
    pub fn n_clamped(&self) -> usize {
        self.n_clamped
    }

    pub fn n_fit_samples(&self) -> usize {
        self.n_fit_samples
    }

    pub fn created_utc(&self) -> &str {
        &self.created_utc
    }

    /// `max |W·W⁻¹ − I|`.
    pub fn inverse_error(&self) -> f64 {
        identity_deviation(&(&self.w * &self.w_inv))
    }

    /// Reassembles a model from persisted parts, re-checking its invariants.
    /// Eigenvalues are recovered from the row norms of `W`, since
    /// `W Wᵀ = Λ⁻¹`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        mean: DVector<f64>,
        w: DMatrix<f64>,
        w_inv: DMatrix<f64>,
        tau: f64,
        dropped_features: Vec<usize>,
        noise_seed: u64,
        noise_variance: f64,
        eig_floor: f64,
        n_clamped: usize,
        n_fit_samples: usize,
        created_utc: String,
    ) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Integrity("model has dimension 0".into()));
        }
        for (name, m) in [("w", &w), ("w_inv", &w_inv)] {
            if m.shape() != (d, d) {
                return Err(Error::Integrity(format!(
                    "{name} has shape {:?}, expected ({d}, {d})",
                    m.shape()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!(
                    "{name} contains non-finite values"
                )));
            }
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity("mean contains non-finite values".into()));
        }
        if let Some(bad) = dropped_features.iter().find(|&&j| j >= d) {
            return Err(Error::Integrity(format!(
                "dropped feature index {bad} out of range for dimension {d}"
            )));
        }
        let eigenvalues = DVector::from_iterator(d, w.row_iter().map(|r| 1.0 / r.norm_squared()));
        let model = Self {
            mean,
            w,
            w_inv,
            eigenvalues,
            tau,
            dropped_features,
            zero_variance_features: Vec::new(),
            noise_seed,
            noise_variance,
            eig_floor,
            n_clamped,
            n_fit_samples,
            created_utc,
        };
        let err = model.inverse_error();
        if err.is_nan() || err > INVERSE_TOLERANCE {
            return Err(Error::Integrity(format!(
                "w * w_inv deviates from identity by {err:e} (tolerance {INVERSE_TOLERANCE:e})"
            )));
        }
        Ok(model)
    }
}

pub fn compute_mean_and_center(x: &EmbeddingMatrix) -> Result<(DVector<f64>, EmbeddingMatrix)> {
    let data = x.as_matrix();
    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    Ok((mean, EmbeddingMatrix::new(centered)?))
}

/// `(1/N) · centeredᵀ · centered`, symmetrized exactly.
pub fn compute_covariance(centered: &EmbeddingMatrix) -> CovarianceMatrix {
    let x = centered.as_matrix();
    let n = x.nrows();
    let mut sigma = x.tr_mul(x) / n as f64;
    let d = sigma.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = avg;
            sigma[(j, i)] = avg;
        }
    }
    CovarianceMatrix {
        sigma,
        n_samples: n,
    }
}

/// Replaces the higher-indexed feature of every pair whose absolute Pearson
/// correlation in `x` exceeds `tau` with i.i.d. `N(0, noise_variance)` draws.
///
/// Correlations come from the unmodified input in a single pass. Constant
/// features have no defined correlation and are always replaced. Noise is
/// drawn column by column in ascending index order from a ChaCha8 stream
/// seeded with `seed`.
pub fn prune_correlated_features(
    x: &EmbeddingMatrix,
    tau: f64,
    seed: u64,
    noise_variance: f64,
) -> Result<PruneOutcome> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Validation(format!(
            "tau must lie in (0, 1], got {tau}"
        )));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::Validation(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    let d = x.dim();
    let (_, centered) = compute_mean_and_center(x)?;
    let cov = compute_covariance(&centered).sigma;

    let std: Vec<f64> = (0..d).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let zero_variance: Vec<usize> = (0..d)
        .filter(|&j| {
            let scale = x.as_matrix().column(j).amax();
            std[j] <= 1e-12 * scale
        })
        .collect();

    let mut drop = vec![false; d];
    for &j in &zero_variance {
        drop[j] = true;
    }
    for i in 0..d {
        if zero_variance.contains(&i) {
            continue;
        }
        for j in (i + 1)..d {
            if drop[j] {
                continue;
            }
            let corr = cov[(i, j)] / (std[i] * std[j]);
            if corr.abs() > tau {
                drop[j] = true;
            }
        }
    }
    let dropped: Vec<usize> = (0..d).filter(|&j| drop[j]).collect();

    let mut data = x.as_matrix().clone();
    if !dropped.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_variance.sqrt())
            .map_err(|e| Error::Validation(format!("noise distribution: {e}")))?;
        for &j in &dropped {
            for v in data.column_mut(j).iter_mut() {
                *v = noise.sample(&mut rng);
            }
        }
    }
    Ok(PruneOutcome {
        pruned: EmbeddingMatrix::new(data)?,
        dropped,
        zero_variance,
    })
}

pub fn fit_whitening(x: &EmbeddingMatrix, opts: &FitOptions) -> Result<WhiteningModel> {
    if x.n_samples() < 2 {
        return Err(Error::Validation(format!(
            "fitting needs at least 2 samples, got {}",
            x.n_samples()
        )));
    }
    if !(opts.eig_floor > 0.0 && opts.eig_floor < 1.0) {
        return Err(Error::Validation(format!(
            "eig_floor must lie in (0, 1), got {}",
            opts.eig_floor
        )));
    }
    let d = x.dim();
    let pruned = prune_correlated_features(x, opts.tau, opts.seed, opts.noise_variance)?;
    let (mean, centered) = compute_mean_and_center(&pruned.pruned)?;
    let cov = compute_covariance(&centered);

    let eig = SymmetricEigen::try_new(cov.sigma, f64::EPSILON, 1000 * d.max(10))
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::Numerical(format!(
            "largest covariance eigenvalue is {lambda_max}; data has no variance"
        )));
    }
    let floor = opts.eig_floor * lambda_max;

    let mut eigenvalues = DVector::zeros(d);
    let mut vectors = DMatrix::zeros(d, d);
    let mut n_clamped = 0;
    for (k, &src) in order.iter().enumerate() {
        let mut lambda = eig.eigenvalues[src];
        if lambda < floor {
            lambda = floor;
            n_clamped += 1;
        }
        eigenvalues[k] = lambda;
        let mut v = eig.eigenvectors.column(src).into_owned();
        // gauge: largest-magnitude component positive (first one on ties)
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &c)| {
                if c.abs() > best.1 {
                    (i, c.abs())
                } else {
                    best
                }
            })
            .0;
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(k, &v);
    }

    let inv_sqrt = eigenvalues.map(|l| 1.0 / l.sqrt());
    let sqrt = eigenvalues.map(f64::sqrt);
    let w = DMatrix::from_diagonal(&inv_sqrt) * vectors.transpose();
    let w_inv = &vectors * DMatrix::from_diagonal(&sqrt);

    let created_utc = opts
        .created_utc
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));

    Ok(WhiteningModel {
        mean,
        w,
        w_inv,
        eigenvalues,
        tau: opts.tau,
        dropped_features: pruned.dropped,
        zero_variance_features: pruned.zero_variance,
        noise_seed: opts.seed,
        noise_variance: opts.noise_variance,
        eig_floor: opts.eig_floor,
        n_clamped,
        n_fit_samples: x.n_samples(),
        created_utc,
    })
}

/// `y = W (x − μ)` for every row.
pub fn whiten(model: &WhiteningModel, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    x.ensure_dim(model.dim(), "whiten")?;
    let mut centered = x.as_matrix().clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-model.mean[j]);
    }
    EmbeddingMatrix::new(centered * model.w.transpose())
}

/// `x = W⁻¹ y + μ` for every row.
pub fn unwhiten(model: &WhiteningModel, y: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    y.ensure_dim(model.dim(), "unwhiten")?;
    let mut x = y.as_matrix() * model.w_inv.transpose();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(model.mean[j]);
    }
    EmbeddingMatrix::new(x)
}

pub(crate) fn identity_deviation(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for ((i, j), v) in m
        .iter()
        .enumerate()
        .map(|(k, v)| ((k % m.nrows(), k / m.nrows()), v))
    {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((v - target).abs());
    }
    worst
}
