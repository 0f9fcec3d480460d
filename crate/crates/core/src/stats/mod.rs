//! Normality tests, correlation and separation statistics, histograms.

mod cosine;
mod histogram;
mod normality;

use nalgebra::DMatrix;
use serde::Serialize;

pub use cosine::{pairwise_cosine_stats, CosineStats};
pub use histogram::{histogram, HistogramBin, HistogramSpec};
pub use normality::{
    anderson_darling, dagostino_pearson, normal_cdf, normality_battery, DagostinoPearson,
    FeatureNormality, NormalityReport, AD_THRESHOLD, DP_ALPHA,
};

use crate::error::{Error, Result};
use crate::matrix::ensure_finite;

/// `Σ|diag(M)| / Σ|M|` for a square matrix.
pub fn diagonal_score(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() || m.is_empty() {
        return Err(Error::Validation(format!(
            "diagonal score needs a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m.as_slice(), "matrix")?;
    let total: f64 = m.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Err(Error::Domain("diagonal score of an all-zero matrix".into()));
    }
    Ok(m.diagonal().iter().map(|v| v.abs()).sum::<f64>() / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationResult {
    pub auc: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Probability that a random positive scores above a random negative, ties
/// counting one half (the Mann-Whitney U statistic over `n₊·n₋`).
pub fn auc(positives: &[f64], negatives: &[f64]) -> Result<SeparationResult> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Validation(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    ensure_finite(positives, "positive scores")?;
    ensure_finite(negatives, "negative scores")?;

    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&v| (v, true))
        .chain(negatives.iter().map(|&v| (v, false)))
        .collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // twice the U statistic, kept as an integer
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice_u += p * (2 * neg_below + q);
        neg_below += q;
        i = j;
    }
    let denom = 2 * positives.len() as u128 * negatives.len() as u128;
    // evaluate the smaller side first so that swapping the classes gives
    // exactly 1 − auc
    let auc = if 2 * twice_u <= denom {
        twice_u as f64 / denom as f64
    } else {
        1.0 - (denom - twice_u) as f64 / denom as f64
    };
    Ok(SeparationResult {
        auc,
        n_positive: positives.len(),
        n_negative: negatives.len(),
    })
}

/// Sample Pearson correlation.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "correlation inputs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Validation(
            "correlation needs at least two pairs".into(),
        ));
    }
    ensure_finite(a, "first series")?;
    ensure_finite(b, "second series")?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate(
            "correlation with a constant series".into(),
        ));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
