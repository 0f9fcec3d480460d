//! Whitening of embedding matrices and the statistics built on top of it.
//!
//! Raw embeddings are mapped by a fitted PCA whitening transform into a space
//! where features are zero-mean, unit-variance and uncorrelated. In that space
//! the squared norm of an embedding is a log-likelihood surrogate under an
//! i.i.d. standard normal model, and norms follow a chi distribution.
//!
//! Modules:
//! - [`tensor_io`]: NPY/CSV embedding files and zipped model bundles.
//! - [`whitening`]: covariance, correlated-feature pruning, fit/apply/invert.
//! - [`likelihood`]: log-likelihood scores and chi-distribution diagnostics.
//! - [`stats`]: normality batteries, diagonal score, cosine uniformity, AUC,
//!   Pearson correlation and histograms.
//! - [`geometry`]: SLERP, full-circle SLERP and the opposite embedding.
//! - [`image_metrics`]: total variation, entropy and saturation of images.

pub mod error;
pub mod geometry;
pub mod image_metrics;
pub mod likelihood;
mod matrix;
pub mod stats;
pub mod tensor_io;
pub mod whitening;

pub use error::{Error, Result};
pub use geometry::SlerpPath;
pub use image_metrics::ImageTensor;
pub use likelihood::{ChiSummary, LikelihoodScore};
pub use matrix::EmbeddingMatrix;
pub use stats::{HistogramSpec, NormalityReport, SeparationResult};
pub use whitening::{CovarianceMatrix, FitOptions, WhiteningModel};

/// Re-exported so downstream crates can build matrices without pinning their
/// own nalgebra version.
pub use nalgebra::{DMatrix, DVector};
