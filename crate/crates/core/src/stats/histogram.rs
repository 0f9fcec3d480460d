use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::ensure_finite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    #[serde(rename = "bin_lo")]
    pub lo: f64,
    #[serde(rename = "bin_hi")]
    pub hi: f64,
    pub count: u64,
}

/// Equal-width bins over `[lo, hi]`; every bin is half-open except the last,
/// which includes `hi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct HistogramSpec {
    pub bins: Vec<HistogramBin>,
}

impl HistogramSpec {
    /// Empty histogram with `n_bins` equal-width bins on `[lo, hi]`.
    pub fn with_range(n_bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Validation("histogram needs at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(format!(
                "invalid histogram range [{lo}, {hi}]"
            )));
        }
        let edge = |k: usize| {
            if k == n_bins {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n_bins as f64
            }
        };
        let bins = (0..n_bins)
            .map(|k| HistogramBin {
                lo: edge(k),
                hi: edge(k + 1),
                count: 0,
            })
            .collect();
        Ok(Self { bins })
    }

    pub fn lo(&self) -> f64 {
        self.bins[0].lo
    }

    pub fn hi(&self) -> f64 {
        self.bins[self.bins.len() - 1].hi
    }

    /// Index of the bin holding `v`, or `None` outside `[lo, hi]` or for NaN.
    pub fn bin_index(&self, v: f64) -> Option<usize> {
        let (lo, hi, n) = (self.lo(), self.hi(), self.bins.len());
        if !(v >= lo && v <= hi) {
            return None;
        }
        let mut k = (((v - lo) / (hi - lo)) * n as f64).floor() as usize;
        k = k.min(n - 1);
        // the division can land one bin off near an edge
        while k > 0 && v < self.bins[k].lo {
            k -= 1;
        }
        while k + 1 < n && v >= self.bins[k + 1].lo {
            k += 1;
        }
        Some(k)
    }

    /// Adds `v`; returns false when it falls outside the range.
    pub fn add(&mut self, v: f64) -> bool {
        match self.bin_index(v) {
            Some(k) => {
                self.bins[k].count += 1;
                true
            }
            None => false,
        }
    }

    /// Adds the counts of a histogram with identical bins.
    pub fn merge(&mut self, other: &HistogramSpec) {
        debug_assert_eq!(self.bins.len(), other.bins.len());
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.count += b.count;
        }
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Centre of the fullest bin (the first one on ties).
    pub fn mode_center(&self) -> f64 {
        let mut best = &self.bins[0];
        for b in &self.bins[1..] {
            if b.count > best.count {
                best = b;
            }
        }
        0.5 * (best.lo + best.hi)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for b in &self.bins {
            writeln!(w, "{:.16e},{:.16e},{}", b.lo, b.hi, b.count)?;
        }
        Ok(())
    }
}

/// Histogram of `values`. Without an explicit range the data's min and max
/// are used; a constant sample gets the range `v ± 0.5`. Values outside an
/// explicit range are not counted.
pub fn histogram(
    values: &[f64],
    n_bins: usize,
    range: Option<(f64, f64)>,
) -> Result<HistogramSpec> {
    ensure_finite(values, "histogram input")?;
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            if values.is_empty() {
                return Err(Error::Validation(
                    "histogram of an empty sample needs a range".into(),
                ));
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let mut h = HistogramSpec::with_range(n_bins, lo, hi)?;
    for &v in values {
        h.add(v);
    }
    Ok(h)
}
