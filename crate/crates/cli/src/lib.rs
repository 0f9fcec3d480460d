//! Command-line front end for `whitex-core`.
//!
//! Every invocation runs exactly one subcommand, writes its output files
//! atomically and returns a JSON summary that the binary prints as a single
//! line on standard output.

mod commands;
mod image;
mod output;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};
use whitex_core::{Error, Result};

pub use image::load_image;
pub use output::OutputFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Fit a whitening model and save it as a bundle.
    Fit,
    /// Whiten embeddings with a saved model.
    Whiten,
    /// Map whitened embeddings back to the raw space.
    Unwhiten,
    /// Per-row norm and log-likelihood.
    Loglik,
    /// Compare whitened norms with the chi model.
    Chisummary,
    /// Anderson-Darling and D'Agostino-Pearson battery.
    Normtest,
    /// Diagonal dominance of a covariance (or square) matrix.
    Diagscore,
    /// Pairwise cosine similarity statistics.
    Cosinestats,
    /// Area under the ROC curve for two score sets.
    Auc,
    /// Pearson correlation of two score lists.
    Corr,
    /// Histogram of a list of values.
    Hist,
    /// Spherical interpolation between the first two rows.
    Slerp,
    /// Full-circle SLERP from the first row through the second.
    SlerpCircle,
    /// Negate every row.
    Opposite,
    /// Rescale every row to norm √d.
    Normalize,
    /// Total variation, entropy and saturation of images.
    Imgmetrics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Whiten => "whiten",
            Command::Unwhiten => "unwhiten",
            Command::Loglik => "loglik",
            Command::Chisummary => "chisummary",
            Command::Normtest => "normtest",
            Command::Diagscore => "diagscore",
            Command::Cosinestats => "cosinestats",
            Command::Auc => "auc",
            Command::Corr => "corr",
            Command::Hist => "hist",
            Command::Slerp => "slerp",
            Command::SlerpCircle => "slerp-circle",
            Command::Opposite => "opposite",
            Command::Normalize => "normalize",
            Command::Imgmetrics => "imgmetrics",
        }
    }
}

/// Parsed command line. Flags that a subcommand does not use are ignored.
#[derive(Debug, Clone, Parser)]
#[command(name = "whitex", version, about = "Whitened embedding analysis")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,

    /// Input embeddings (.npy or .csv), values, or images.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Model bundle written by `fit`; inputs are whitened with it first.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Table format; inferred from the output extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,

    #[arg(long, default_value_t = 0.999)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "noise-var", default_value_t = 0.1)]
    pub noise_variance: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub eig_floor: f64,
    #[arg(long, default_value_t = 250)]
    pub group_size: usize,
    #[arg(long = "bins", default_value_t = 50)]
    pub n_bins: usize,
    #[arg(long, default_value_t = 10.0)]
    pub step_deg: f64,
    #[arg(long, default_value_t = 20_000_000)]
    pub max_pairs: u64,

    /// Positive-class scores or embeddings for `auc`.
    #[arg(long)]
    pub positives: Option<PathBuf>,
    /// Negative-class scores or embeddings for `auc`.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    /// Second series for `corr`.
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// CSV column holding the values; defaults to the last column.
    #[arg(long)]
    pub column: Option<String>,
    /// Interpolation parameters for `slerp`, comma separated.
    #[arg(long = "t", value_delimiter = ',', allow_negative_numbers = true)]
    pub t: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub range_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub range_hi: Option<f64>,
    /// Degrees CSV for `slerp-circle`; `<output stem>.degrees.csv` by default.
    #[arg(long)]
    pub degrees_output: Option<PathBuf>,
    /// Treat the `diagscore` input as the matrix itself instead of data.
    #[arg(long)]
    pub square: bool,
    /// Timestamp stored by `fit`; the input file's modification time by default.
    #[arg(long)]
    pub created_utc: Option<String>,
}

impl RunConfig {
    /// Config for `command` with every flag at its default.
    pub fn new(command: Command) -> Self {
        Self::parse_from(["whitex", command.name()])
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("--tau must be in (0, 1], got {}", self.tau));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return bad(format!(
                "--noise-var must be positive, got {}",
                self.noise_variance
            ));
        }
        if !(0.0..1.0).contains(&self.eig_floor) {
            return bad(format!(
                "--eig-floor must be in [0, 1), got {}",
                self.eig_floor
            ));
        }
        if self.group_size < 8 {
            return bad(format!(
                "--group-size must be at least 8, got {}",
                self.group_size
            ));
        }
        if self.n_bins == 0 {
            return bad("--bins must be positive".into());
        }
        if !(self.step_deg > 0.0 && self.step_deg <= 360.0) {
            return bad(format!(
                "--step-deg must be in (0, 360], got {}",
                self.step_deg
            ));
        }
        if self.max_pairs == 0 {
            return bad("--max-pairs must be positive".into());
        }
        if self.range_lo.is_some() != self.range_hi.is_some() {
            return bad("--range-lo and --range-hi must be given together".into());
        }
        Ok(())
    }
}

/// Runs one subcommand and returns its summary.
pub fn run(config: &RunConfig) -> Result<Value> {
    config.validate()?;
    let mut summary = commands::dispatch(config)?;
    let obj = summary.as_object_mut().expect("summaries are objects");
    let mut line = serde_json::Map::new();
    line.insert("command".into(), json!(config.command.name()));
    line.insert("status".into(), json!("ok"));
    line.append(obj);
    Ok(Value::Object(line))
}

/// Structured form of an error for standard error.
pub fn error_json(command: Option<Command>, err: &Error) -> Value {
    json!({
        "command": command.map(Command::name),
        "status": "error",
        "kind": err.kind(),
        "message": err.to_string(),
    })
}
