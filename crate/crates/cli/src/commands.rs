use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use whitex_core::geometry::{full_circle_slerp, opposite_embedding, slerp};
use whitex_core::likelihood::{batch_scores, chi_summary, log_likelihood, normalize_to_sqrt_d};
use whitex_core::stats::{
    auc, diagonal_score, histogram, normality_battery, pairwise_cosine_stats, pearson_correlation,
};
use whitex_core::tensor_io::{
    load_model, read_embeddings, read_values, save_model, write_embeddings, TensorFormat,
};
use whitex_core::whitening::{
    compute_covariance, compute_mean_and_center, fit_whitening, unwhiten, whiten,
};
use whitex_core::{EmbeddingMatrix, Error, FitOptions, Result, WhiteningModel};

use crate::image::load_image;
use crate::output::{Cell, OutputFormat, Table};
use crate::{Command, RunConfig};

pub(crate) fn dispatch(cfg: &RunConfig) -> Result<Value> {
    match cfg.command {
        Command::Fit => fit(cfg),
        Command::Whiten => transform(cfg, whiten),
        Command::Unwhiten => transform(cfg, unwhiten),
        Command::Loglik => loglik(cfg),
        Command::Chisummary => chisummary(cfg),
        Command::Normtest => normtest(cfg),
        Command::Diagscore => diagscore(cfg),
        Command::Cosinestats => cosinestats(cfg),
        Command::Auc => auc_cmd(cfg),
        Command::Corr => corr(cfg),
        Command::Hist => hist(cfg),
        Command::Slerp => slerp_cmd(cfg),
        Command::SlerpCircle => slerp_circle(cfg),
        Command::Opposite => map_rows(cfg, false, opposite_embedding),
        Command::Normalize => map_rows(cfg, true, normalize_to_sqrt_d),
        Command::Imgmetrics => imgmetrics(cfg),
    }
}

fn require<'a>(cfg: &RunConfig, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Validation(format!("{} requires {flag}", cfg.command.name())))
}

fn read_matrix(path: &Path) -> Result<EmbeddingMatrix> {
    read_embeddings(path, TensorFormat::from_path(path)?)
}

fn write_matrix(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    write_embeddings(m, path, TensorFormat::from_path(path)?)
}

fn model(cfg: &RunConfig) -> Result<Option<WhiteningModel>> {
    cfg.model.as_deref().map(load_model).transpose()
}

/// Reads embeddings and whitens them when a model is given.
fn read_whitened(cfg: &RunConfig, path: &Path) -> Result<EmbeddingMatrix> {
    let x = read_matrix(path)?;
    match model(cfg)? {
        Some(m) => whiten(&m, &x),
        None => Ok(x),
    }
}

fn save_table(cfg: &RunConfig, table: &Table) -> Result<Option<String>> {
    match &cfg.output {
        Some(path) => {
            table.save(path, OutputFormat::resolve(cfg.format, path))?;
            Ok(Some(path.display().to_string()))
        }
        None => Ok(None),
    }
}

fn rfc3339(t: std::time::SystemTime) -> String {
    chrono::DateTime::<chrono::Utc>::from(t).to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn fit(cfg: &RunConfig) -> Result<Value> {
    let input = require(cfg, &cfg.input, "--input")?;
    let output = require(cfg, &cfg.output, "--output")?;
    let x = read_matrix(input)?;
    // the input's mtime rather than the clock keeps reruns byte-identical
    let created_utc = match &cfg.created_utc {
        Some(s) => s.clone(),
        None => std::fs::metadata(input)
            .and_then(|m| m.modified())
            .map(rfc3339)
            .map_err(|e| Error::Io {
                path: input.into(),
                source: e,
            })?,
    };
    let opts = FitOptions {
        tau: cfg.tau,
        seed: cfg.seed,
        noise_variance: cfg.noise_variance,
        eig_floor: cfg.eig_floor,
        created_utc: Some(created_utc),
    };
    let m = fit_whitening(&x, &opts)?;
    save_model(&m, output)?;
    Ok(json!({
        "output": output.display().to_string(),
        "n_samples": m.n_fit_samples(),
        "dim": m.dim(),
        "dropped_features": m.dropped_features().len(),
        "zero_variance_features": m.zero_variance_features().len(),
        "clamped_eigenvalues": m.n_clamped(),
        "inverse_error": m.inverse_error(),
    }))
}

fn transform(
    cfg: &RunConfig,
    f: fn(&WhiteningModel, &EmbeddingMatrix) -> Result<EmbeddingMatrix>,
) -> Result<Value> {
    let input = require(cfg, &cfg.input, "--input")?;
    let output = require(cfg, &cfg.output, "--output")?;
    let m = load_model(require(cfg, &cfg.model, "--model")?)?;
    let y = f(&m, &read_matrix(input)?)?;
    write_matrix(&y, output)?;
    Ok(json!({
        "output": output.display().to_string(),
        "n_samples": y.n_samples(),
        "dim": y.dim(),
    }))
}

fn loglik(cfg: &RunConfig) -> Result<Value> {
    let x = read_matrix(require(cfg, &cfg.input, "--input")?)?;
    let scores = match model(cfg)? {
        Some(m) => batch_scores(&m, &x)?,
        None => x
            .rows()
            .map(|r| log_likelihood(&r))
            .collect::<Result<_>>()?,
    };
    let mut table = Table::new(&["index", "norm", "loglik"]);
    for (i, s) in scores.iter().enumerate() {
        table.push(vec![i.into(), s.norm.into(), s.log_likelihood.into()]);
    }
    let n = scores.len() as f64;
    Ok(json!({
        "output": save_table(cfg, &table)?,
        "n_samples": scores.len(),
        "dim": x.dim(),
        "mean_norm": scores.iter().map(|s| s.norm).sum::<f64>() / n,
        "mean_loglik": scores.iter().map(|s| s.log_likelihood).sum::<f64>() / n,
    }))
}

fn chisummary(cfg: &RunConfig) -> Result<Value> {
    let y = read_whitened(cfg, require(cfg, &cfg.input, "--input")?)?;
    let s = chi_summary(&y.row_norms(), y.dim())?;
    let mut table = Table::new(&[
        "dim",
        "theoretical_mean",
        "theoretical_std",
        "empirical_mean",
        "empirical_std",
        "relative_deviation_mean",
        "relative_deviation_std",
    ]);
    table.push(vec![
        s.dim.into(),
        s.theoretical_mean.into(),
        s.theoretical_std.into(),
        s.empirical_mean.into(),
        s.empirical_std.into(),
        s.relative_deviation_mean.into(),
        s.relative_deviation_std.into(),
    ]);
    let mut out = serde_json::to_value(s).expect("summary serializes");
    out["output"] = json!(save_table(cfg, &table)?);
    Ok(out)
}

fn normtest(cfg: &RunConfig) -> Result<Value> {
    let y = read_whitened(cfg, require(cfg, &cfg.input, "--input")?)?;
    let report = normality_battery(&y, cfg.group_size)?;
    let mut table = Table::new(&["feature", "ad_stat", "dp_stat", "dp_pvalue"]);
    for f in &report.per_feature {
        table.push(vec![
            f.feature.into(),
            f.ad_stat.into(),
            f.dp_stat.into(),
            f.dp_pvalue.into(),
        ]);
    }
    Ok(json!({
        "output": save_table(cfg, &table)?,
        "n_features": report.per_feature.len(),
        "group_size": report.group_size,
        "n_groups": report.n_groups,
        "avg_ad": report.avg_ad,
        "avg_dp_pvalue": report.avg_dp_pvalue,
        "pct_normal_ad": report.pct_normal_ad,
        "pct_normal_dp": report.pct_normal_dp,
    }))
}

fn diagscore(cfg: &RunConfig) -> Result<Value> {
    let input = require(cfg, &cfg.input, "--input")?;
    let matrix = if cfg.square {
        read_matrix(input)?.into_matrix()
    } else {
        let (_, centered) = compute_mean_and_center(&read_whitened(cfg, input)?)?;
        compute_covariance(&centered).sigma
    };
    let score = diagonal_score(&matrix)?;
    let mut table = Table::new(&["dim", "diagonal_score"]);
    table.push(vec![matrix.nrows().into(), score.into()]);
    Ok(json!({
        "output": save_table(cfg, &table)?,
        "dim": matrix.nrows(),
        "diagonal_score": score,
    }))
}

fn histogram_table(h: &whitex_core::HistogramSpec) -> Table {
    let mut table = Table::new(&["bin_lo", "bin_hi", "count"]);
    for b in &h.bins {
        table.push(vec![b.lo.into(), b.hi.into(), b.count.into()]);
    }
    table
}

fn cosinestats(cfg: &RunConfig) -> Result<Value> {
    let y = read_whitened(cfg, require(cfg, &cfg.input, "--input")?)?;
    let s = pairwise_cosine_stats(&y, cfg.max_pairs, cfg.n_bins, cfg.seed)?;
    Ok(json!({
        "output": save_table(cfg, &histogram_table(&s.histogram))?,
        "mean": s.mean,
        "std": s.std,
        "n_pairs": s.n_pairs,
        "sampled": s.sampled,
    }))
}

/// Scalar scores from a file: log-likelihoods of whitened rows when a model
/// is given, the values themselves otherwise.
fn scores(cfg: &RunConfig, path: &Path, model: Option<&WhiteningModel>) -> Result<Vec<f64>> {
    match model {
        Some(m) => Ok(batch_scores(m, &read_matrix(path)?)?
            .into_iter()
            .map(|s| s.log_likelihood)
            .collect()),
        None => read_values(path, cfg.column.as_deref()),
    }
}

fn auc_cmd(cfg: &RunConfig) -> Result<Value> {
    let m = model(cfg)?;
    let pos = scores(
        cfg,
        require(cfg, &cfg.positives, "--positives")?,
        m.as_ref(),
    )?;
    let neg = scores(
        cfg,
        require(cfg, &cfg.negatives, "--negatives")?,
        m.as_ref(),
    )?;
    let r = auc(&pos, &neg)?;
    let mut table = Table::new(&["auc", "n_positive", "n_negative"]);
    table.push(vec![r.auc.into(), r.n_positive.into(), r.n_negative.into()]);
    Ok(json!({
        "output": save_table(cfg, &table)?,
        "auc": r.auc,
        "n_positive": r.n_positive,
        "n_negative": r.n_negative,
    }))
}

fn corr(cfg: &RunConfig) -> Result<Value> {
    let m = model(cfg)?;
    let a = scores(cfg, require(cfg, &cfg.input, "--input")?, m.as_ref())?;
    let b = scores(cfg, require(cfg, &cfg.other, "--other")?, m.as_ref())?;
    let r = pearson_correlation(&a, &b)?;
    let mut table = Table::new(&["n", "pearson_r"]);
    table.push(vec![a.len().into(), r.into()]);
    Ok(json!({
        "output": save_table(cfg, &table)?,
        "n": a.len(),
        "pearson_r": r,
    }))
}

fn hist(cfg: &RunConfig) -> Result<Value> {
    let values = read_values(require(cfg, &cfg.input, "--input")?, cfg.column.as_deref())?;
    let range = cfg.range_lo.zip(cfg.range_hi);
    let h = histogram(&values, cfg.n_bins, range)?;
    Ok(json!({
        "output": save_table(cfg, &histogram_table(&h))?,
        "n_values": values.len(),
        "n_counted": h.total(),
        "lo": h.lo(),
        "hi": h.hi(),
        "mode_center": h.mode_center(),
    }))
}

fn endpoints(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = read_matrix(require(cfg, &cfg.input, "--input")?)?;
    if x.n_samples() < 2 {
        return Err(Error::Validation(format!(
            "{} needs an input with at least two rows, got {}",
            cfg.command.name(),
            x.n_samples()
        )));
    }
    Ok((x.row_vec(0), x.row_vec(1)))
}

fn slerp_cmd(cfg: &RunConfig) -> Result<Value> {
    let output = require(cfg, &cfg.output, "--output")?;
    if cfg.t.is_empty() {
        return Err(Error::Validation("slerp requires --t".into()));
    }
    let (e1, e2) = endpoints(cfg)?;
    let points = cfg
        .t
        .iter()
        .map(|&t| slerp(&e1, &e2, t))
        .collect::<Result<Vec<_>>>()?;
    write_matrix(&EmbeddingMatrix::from_rows(&points)?, output)?;
    Ok(json!({
        "output": output.display().to_string(),
        "n_points": points.len(),
        "theta_deg": whitex_core::geometry::angle_between(&e1, &e2)?.to_degrees(),
    }))
}

fn default_degrees_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.degrees.csv"))
}

fn slerp_circle(cfg: &RunConfig) -> Result<Value> {
    let output = require(cfg, &cfg.output, "--output")?;
    let degrees_path = cfg
        .degrees_output
        .clone()
        .unwrap_or_else(|| default_degrees_path(output));
    let (e1, e2) = endpoints(cfg)?;
    let path = full_circle_slerp(&e1, &e2, cfg.step_deg)?;

    let mut table = Table::new(&["index", "degree"]);
    for (i, &d) in path.degrees.iter().enumerate() {
        table.push(vec![i.into(), d.into()]);
    }
    write_matrix(&EmbeddingMatrix::from_rows(&path.points)?, output)?;
    if let Err(e) = table.save(
        &degrees_path,
        OutputFormat::resolve(cfg.format, &degrees_path),
    ) {
        // never leave the points without their degrees
        let _ = std::fs::remove_file(output);
        return Err(e);
    }
    Ok(json!({
        "output": output.display().to_string(),
        "degrees_output": degrees_path.display().to_string(),
        "n_points": path.points.len(),
        "theta_deg": path.theta_rad.to_degrees(),
    }))
}

fn map_rows(
    cfg: &RunConfig,
    whiten_first: bool,
    f: fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Value> {
    let input = require(cfg, &cfg.input, "--input")?;
    let output = require(cfg, &cfg.output, "--output")?;
    let x = if whiten_first {
        read_whitened(cfg, input)?
    } else {
        read_matrix(input)?
    };
    let rows = x
        .rows()
        .enumerate()
        .map(|(i, r)| {
            f(&r).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("row {i}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let y = EmbeddingMatrix::from_rows(&rows)?;
    write_matrix(&y, output)?;
    Ok(json!({
        "output": output.display().to_string(),
        "n_samples": y.n_samples(),
        "dim": y.dim(),
    }))
}

fn image_paths(input: &Path) -> Result<Vec<PathBuf>> {
    if !input.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = std::fs::read_dir(input).map_err(|e| Error::Io {
        path: input.into(),
        source: e,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry
            .map_err(|e| Error::Io {
                path: input.into(),
                source: e,
            })?
            .path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "npy")) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no .png or .npy images",
            input.display()
        )));
    }
    Ok(paths)
}

fn imgmetrics(cfg: &RunConfig) -> Result<Value> {
    let paths = image_paths(require(cfg, &cfg.input, "--input")?)?;
    let mut table = Table::new(&["file", "total_variation", "entropy_bits", "saturation_pct"]);
    let (mut tv, mut ent, mut sat) = (0.0, 0.0, 0.0);
    for p in &paths {
        let m = whitex_core::image_metrics::image_metrics(&load_image(p)?)?;
        tv += m.total_variation;
        ent += m.entropy_bits;
        sat += m.saturation_pct;
        table.push(vec![
            Cell::Text(p.display().to_string()),
            m.total_variation.into(),
            m.entropy_bits.into(),
            m.saturation_pct.into(),
        ]);
    }
    let n = paths.len() as f64;
    Ok(json!({
        "output": save_table(cfg, &table)?,
        "n_images": paths.len(),
        "mean_total_variation": tv / n,
        "mean_entropy_bits": ent / n,
        "mean_saturation_pct": sat / n,
    }))
}
