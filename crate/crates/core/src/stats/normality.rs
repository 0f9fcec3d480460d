//! Anderson-Darling and D'Agostino-Pearson normality tests and the grouped
//! per-feature battery built from them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, EmbeddingMatrix};

/// A² below this value passes.
pub const AD_THRESHOLD: f64 = 0.752;
/// A D'Agostino-Pearson p-value above this passes.
pub const DP_ALPHA: f64 = 0.05;

pub const MIN_SAMPLE: usize = 8;

const CDF_CLAMP: f64 = 1e-15;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DagostinoPearson {
    pub k2: f64,
    pub p_value: f64,
    /// Sample skewness g₁.
    pub skewness: f64,
    /// Sample kurtosis g₂ (not excess).
    pub kurtosis: f64,
}

struct Moments {
    mean: f64,
    /// Central moments with divisor n.
    m2: f64,
    m3: f64,
    m4: f64,
}

fn moments(sample: &[f64], what: &str) -> Result<Moments> {
    if sample.len() < MIN_SAMPLE {
        return Err(Error::Validation(format!(
            "{what} needs at least {MIN_SAMPLE} values, got {}",
            sample.len()
        )));
    }
    ensure_finite(sample, what)?;
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let scale = sample.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m2.sqrt() <= 1e-12 * scale || m2 == 0.0 {
        return Err(Error::Degenerate(format!(
            "{what}: sample has zero variance"
        )));
    }
    Ok(Moments { mean, m2, m3, m4 })
}

/// Anderson-Darling A² against a normal with mean and std (divisor n − 1)
/// estimated from the sample. No small-sample correction is applied.
pub fn anderson_darling(sample: &[f64]) -> Result<f64> {
    let m = moments(sample, "anderson_darling")?;
    let n = sample.len();
    let sd = (m.m2 * n as f64 / (n as f64 - 1.0)).sqrt();
    let mut z: Vec<f64> = sample.iter().map(|x| (x - m.mean) / sd).collect();
    z.sort_unstable_by(f64::total_cmp);

    let clamp = |p: f64| p.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP);
    let mut s = 0.0;
    for i in 0..n {
        let lower = clamp(normal_cdf(z[i])).ln();
        // 1 − F(z) evaluated as F(−z) to keep the upper tail accurate
        let upper = clamp(normal_cdf(-z[n - 1 - i])).ln();
        s += (2 * i + 1) as f64 * (lower + upper);
    }
    Ok(-(n as f64) - s / n as f64)
}

/// D'Agostino-Pearson omnibus `K² = z₁² + z₂²` with `z₁ = g₁/√(6/n)` and
/// `z₂ = (g₂ − 3)/√(24/n)`; the p-value is the χ²(2) survival `exp(−K²/2)`.
pub fn dagostino_pearson(sample: &[f64]) -> Result<DagostinoPearson> {
    let m = moments(sample, "dagostino_pearson")?;
    let n = sample.len() as f64;
    let g1 = m.m3 / m.m2.powf(1.5);
    let g2 = m.m4 / (m.m2 * m.m2);
    let z1 = g1 / (6.0 / n).sqrt();
    let z2 = (g2 - 3.0) / (24.0 / n).sqrt();
    let k2 = z1 * z1 + z2 * z2;
    Ok(DagostinoPearson {
        k2,
        p_value: (-k2 / 2.0).exp(),
        skewness: g1,
        kurtosis: g2,
    })
}

/// Group-averaged statistics of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureNormality {
    pub feature: usize,
    pub ad_stat: f64,
    pub dp_stat: f64,
    pub dp_pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub per_feature: Vec<FeatureNormality>,
    pub avg_ad: f64,
    pub avg_dp_pvalue: f64,
    pub pct_normal_ad: f64,
    pub pct_normal_dp: f64,
    pub group_size: usize,
    pub n_groups: usize,
}

/// Splits the rows into `⌊N / group_size⌋` contiguous groups (dropping the
/// remainder), runs both tests on every feature of every group and averages
/// per feature over groups. A feature passes when its averaged statistic
/// passes.
pub fn normality_battery(y: &EmbeddingMatrix, group_size: usize) -> Result<NormalityReport> {
    if group_size < MIN_SAMPLE {
        return Err(Error::Validation(format!(
            "group size must be at least {MIN_SAMPLE}, got {group_size}"
        )));
    }
    let n = y.n_samples();
    if n < 2 * group_size {
        return Err(Error::Validation(format!(
            "normality battery needs at least {} samples for group size {group_size}, got {n}",
            2 * group_size
        )));
    }
    let n_groups = n / group_size;
    let data = y.as_matrix().as_slice();

    let per_feature = (0..y.dim())
        .into_par_iter()
        .map(|j| {
            let column = &data[j * n..(j + 1) * n];
            let (mut ad, mut k2, mut p) = (0.0, 0.0, 0.0);
            for g in 0..n_groups {
                let group = &column[g * group_size..(g + 1) * group_size];
                let context = |e: Error| match e {
                    Error::Degenerate(msg) => {
                        Error::Degenerate(format!("feature {j}, group {g}: {msg}"))
                    }
                    other => other,
                };
                ad += anderson_darling(group).map_err(context)?;
                let dp = dagostino_pearson(group).map_err(context)?;
                k2 += dp.k2;
                p += dp.p_value;
            }
            let g = n_groups as f64;
            Ok(FeatureNormality {
                feature: j,
                ad_stat: ad / g,
                dp_stat: k2 / g,
                dp_pvalue: p / g,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let d = per_feature.len() as f64;
    let pct = |pass: usize| 100.0 * pass as f64 / d;
    Ok(NormalityReport {
        avg_ad: per_feature.iter().map(|f| f.ad_stat).sum::<f64>() / d,
        avg_dp_pvalue: per_feature.iter().map(|f| f.dp_pvalue).sum::<f64>() / d,
        pct_normal_ad: pct(per_feature
            .iter()
            .filter(|f| f.ad_stat < AD_THRESHOLD)
            .count()),
        pct_normal_dp: pct(per_feature
            .iter()
            .filter(|f| f.dp_pvalue > DP_ALPHA)
            .count()),
        per_feature,
        group_size,
        n_groups,
    })
}
