//! Log-likelihood surrogates in whitened space and the chi model of norms.
//!
//! Under an i.i.d. standard normal model the log-density of a whitened
//! vector `y` is `ℓ(y) = −½ (d log 2π + ‖y‖²)`, a strictly decreasing function
//! of its norm. Norms of such vectors follow the chi distribution with `d`
//! degrees of freedom. Everything is evaluated in the log domain: the raw
//! density underflows long before `d = 768`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, EmbeddingMatrix};
use crate::whitening::{whiten, WhiteningModel};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodScore {
    pub log_likelihood: f64,
    pub norm: f64,
    pub dim: usize,
}

/// Theoretical vs. empirical norm statistics for a population of whitened
/// vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSummary {
    pub dim: usize,
    pub theoretical_mean: f64,
    pub theoretical_std: f64,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    /// `|empirical − theoretical| / theoretical`
    pub relative_deviation_mean: f64,
    pub relative_deviation_std: f64,
}

fn log_normalizer(d: usize) -> f64 {
    d as f64 * LN_2PI
}

pub fn log_likelihood(y: &[f64]) -> Result<LikelihoodScore> {
    if y.is_empty() {
        return Err(Error::Validation(
            "log-likelihood of an empty vector".into(),
        ));
    }
    ensure_finite(y, "log_likelihood")?;
    let sq: f64 = y.iter().map(|v| v * v).sum();
    Ok(LikelihoodScore {
        log_likelihood: -0.5 * (log_normalizer(y.len()) + sq),
        norm: sq.sqrt(),
        dim: y.len(),
    })
}

/// Inverts `norm ↦ ℓ` for dimension `d`.
pub fn norm_from_loglik(l: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Validation("dimension must be at least 1".into()));
    }
    let mut sq = -2.0 * l - log_normalizer(d);
    // the peak value itself may round to slightly above the maximum
    if sq < 0.0 && sq >= -4.0 * f64::EPSILON * log_normalizer(d).max(1.0) {
        sq = 0.0;
    }
    if sq.is_nan() || sq < 0.0 || sq.is_infinite() {
        return Err(Error::Domain(format!(
            "log-likelihood {l} exceeds the maximum {} for d = {d}",
            -0.5 * log_normalizer(d)
        )));
    }
    Ok(sq.sqrt())
}

/// Log-density of the chi distribution with `d` degrees of freedom:
/// `C(d) + (d − 1) log s − s²/2` with `C(d) = −log(2^{d/2−1} Γ(d/2))`.
pub fn chi_log_pdf(s: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Validation("dimension must be at least 1".into()));
    }
    if s.is_nan() || s <= 0.0 || s.is_infinite() {
        return Err(Error::Domain(format!("chi density needs s > 0, got {s}")));
    }
    let half = d as f64 / 2.0;
    let c = -((half - 1.0) * std::f64::consts::LN_2 + libm::lgamma(half));
    Ok(c + (d as f64 - 1.0) * s.ln() - 0.5 * s * s)
}

/// Mean and standard deviation of the chi distribution with `d` degrees of
/// freedom. The mean is `√2 Γ((d+1)/2) / Γ(d/2)`, evaluated through log-gamma
/// differences; the std is `√(d − mean²)`.
pub fn chi_mean_std(d: usize) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::Validation("dimension must be at least 1".into()));
    }
    let df = d as f64;
    let mean =
        std::f64::consts::SQRT_2 * (libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0)).exp();
    let std = (df - mean * mean).max(0.0).sqrt();
    Ok((mean, std))
}

/// Compares a population of norms with the chi model. Empirical std uses
/// divisor `N`.
pub fn chi_summary(norms: &[f64], d: usize) -> Result<ChiSummary> {
    if norms.len() < 2 {
        return Err(Error::Validation(format!(
            "chi summary needs at least 2 norms, got {}",
            norms.len()
        )));
    }
    ensure_finite(norms, "chi_summary")?;
    if let Some(bad) = norms.iter().find(|&&v| v < 0.0) {
        return Err(Error::Validation(format!("negative norm {bad}")));
    }
    let (theoretical_mean, theoretical_std) = chi_mean_std(d)?;
    let n = norms.len() as f64;
    let empirical_mean = norms.iter().sum::<f64>() / n;
    let empirical_std = (norms
        .iter()
        .map(|v| (v - empirical_mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ChiSummary {
        dim: d,
        theoretical_mean,
        theoretical_std,
        empirical_mean,
        empirical_std,
        relative_deviation_mean: (empirical_mean - theoretical_mean).abs() / theoretical_mean,
        relative_deviation_std: (empirical_std - theoretical_std).abs() / theoretical_std,
    })
}

/// Rescales `y` onto the sphere of radius `√d`.
pub fn normalize_to_sqrt_d(y: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(y, "normalize_to_sqrt_d")?;
    let norm = crate::matrix::norm(y);
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::Domain("cannot normalize a zero vector".into()));
    }
    let scale = (y.len() as f64).sqrt() / norm;
    Ok(y.iter().map(|v| v * scale).collect())
}

/// Whitens every row of `x` and scores it, preserving row order.
pub fn batch_scores(model: &WhiteningModel, x: &EmbeddingMatrix) -> Result<Vec<LikelihoodScore>> {
    let y = whiten(model, x)?;
    (0..y.n_samples())
        .into_par_iter()
        .map(|i| log_likelihood(&y.row_vec(i)))
        .collect()
}
