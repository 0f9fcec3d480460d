use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::histogram::HistogramSpec;
use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

const SAMPLE_CHUNK: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CosineStats {
    pub mean: f64,
    /// Population standard deviation over the evaluated pairs.
    pub std: f64,
    pub n_pairs: u64,
    /// True when pairs were drawn at random instead of enumerated.
    pub sampled: bool,
    pub histogram: HistogramSpec,
}

#[derive(Default, Clone)]
struct Accum {
    sum: f64,
    sum_sq: f64,
    n: u64,
}

impl Accum {
    fn push(&mut self, c: f64) {
        self.sum += c;
        self.sum_sq += c * c;
        self.n += 1;
    }
}

fn unit_rows(x: &EmbeddingMatrix) -> Result<DMatrix<f64>> {
    let mut u = x.as_matrix().clone();
    for (i, mut row) in u.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::Validation(format!(
                "row {i} has zero norm; cosine is undefined"
            )));
        }
        row /= norm;
    }
    Ok(u)
}

fn cosine(u: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    u.row(i).dot(&u.row(j)).clamp(-1.0, 1.0)
}

/// Mean, standard deviation and histogram (on `[-1, 1]`) of the cosine
/// similarity over all unordered pairs of distinct rows. Above `max_pairs`
/// pairs, `max_pairs` ordered pairs `(i, j), i ≠ j` are drawn uniformly with a
/// ChaCha8 stream seeded by `seed` instead.
pub fn pairwise_cosine_stats(
    x: &EmbeddingMatrix,
    max_pairs: u64,
    n_bins: usize,
    seed: u64,
) -> Result<CosineStats> {
    let n = x.n_samples();
    if n < 2 {
        return Err(Error::Validation(
            "cosine statistics need at least two rows".into(),
        ));
    }
    if max_pairs == 0 {
        return Err(Error::Validation("max_pairs must be positive".into()));
    }
    let empty = HistogramSpec::with_range(n_bins, -1.0, 1.0)?;
    // rows as columns so each dot product reads contiguous memory
    let u = unit_rows(x)?.transpose();
    let total_pairs = n as u64 * (n as u64 - 1) / 2;
    let sampled = total_pairs > max_pairs;

    let (acc, hist) = if !sampled {
        let partials: Vec<(Accum, HistogramSpec)> = (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut acc = Accum::default();
                let mut hist = empty.clone();
                let ui = u.column(i);
                for j in i + 1..n {
                    let c = ui.dot(&u.column(j)).clamp(-1.0, 1.0);
                    acc.push(c);
                    hist.add(c);
                }
                (acc, hist)
            })
            .collect();
        combine(partials, &empty)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = Accum::default();
        let mut hist = empty.clone();
        let mut remaining = max_pairs;
        let mut pairs = Vec::with_capacity(SAMPLE_CHUNK.min(max_pairs as usize));
        let ut = u.transpose();
        while remaining > 0 {
            let take = remaining.min(SAMPLE_CHUNK as u64) as usize;
            pairs.clear();
            for _ in 0..take {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                pairs.push((i, j));
            }
            let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| cosine(&ut, i, j)).collect();
            for c in values {
                acc.push(c);
                hist.add(c);
            }
            remaining -= take as u64;
        }
        (acc, hist)
    };

    let mean = acc.sum / acc.n as f64;
    let var = (acc.sum_sq / acc.n as f64 - mean * mean).max(0.0);
    Ok(CosineStats {
        mean,
        std: var.sqrt(),
        n_pairs: acc.n,
        sampled,
        histogram: hist,
    })
}

fn combine(partials: Vec<(Accum, HistogramSpec)>, empty: &HistogramSpec) -> (Accum, HistogramSpec) {
    let mut acc = Accum::default();
    let mut hist = empty.clone();
    for (a, h) in partials {
        acc.sum += a.sum;
        acc.sum_sq += a.sum_sq;
        acc.n += a.n;
        hist.merge(&h);
    }
    (acc, hist)
}
