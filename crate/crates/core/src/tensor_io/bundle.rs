//! Zip bundle holding a fitted [`WhiteningModel`]:
//! `manifest.json`, `mean.npy`, `w.npy` and `w_inv.npy`.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use super::{atomic_write, npy};
use crate::error::{Error, Result};
use crate::whitening::{FitOptions, WhiteningModel};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const MEAN: &str = "mean.npy";
const W: &str = "w.npy";
const W_INV: &str = "w_inv.npy";
const MEMBERS: [&str; 4] = [MANIFEST, MEAN, W, W_INV];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dim: usize,
    pub n_fit_samples: usize,
    pub tau: f64,
    pub noise_seed: u64,
    pub noise_variance: f64,
    pub dropped_features: Vec<usize>,
    pub created_utc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamped_eigenvalues: Option<usize>,
}

impl Manifest {
    fn of(model: &WhiteningModel) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            dim: model.dim(),
            n_fit_samples: model.n_fit_samples(),
            tau: model.tau(),
            noise_seed: model.noise_seed(),
            noise_variance: model.noise_variance(),
            dropped_features: model.dropped_features().to_vec(),
            created_utc: model.created_utc().to_string(),
            eig_floor: Some(model.eig_floor()),
            clamped_eigenvalues: Some(model.n_clamped()),
        }
    }
}

/// Writes the bundle. Entries are stored uncompressed with a fixed timestamp
/// so identical models produce identical bytes.
pub fn save_model(model: &WhiteningModel, path: &Path) -> Result<()> {
    let bytes = encode(model).map_err(|e| Error::io(path, e))?;
    atomic_write(path, |w| w.write_all(&bytes))
}

fn encode(model: &WhiteningModel) -> std::io::Result<Vec<u8>> {
    let d = model.dim();
    let manifest = serde_json::to_vec_pretty(&Manifest::of(model))?;

    let mut mean = Vec::new();
    npy::write_npy(&mut mean, &[d], model.mean().as_slice())?;
    let mut w = Vec::new();
    npy::write_npy(&mut w, &[d, d], &row_major(model.w()))?;
    let mut w_inv = Vec::new();
    npy::write_npy(&mut w_inv, &[d, d], &row_major(model.w_inv()))?;

    let opts = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    for (name, data) in [(MANIFEST, manifest), (MEAN, mean), (W, w), (W_INV, w_inv)] {
        zip.start_file(name, opts).map_err(std::io::Error::other)?;
        zip.write_all(&data)?;
    }
    Ok(zip.finish().map_err(std::io::Error::other)?.into_inner())
}

pub fn load_model(path: &Path) -> Result<WhiteningModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut zip = ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| Error::Format(format!("{}: not a model bundle: {e}", path.display())))?;

    let mut names: Vec<&str> = zip.file_names().collect();
    names.sort_unstable();
    let mut expected = MEMBERS.to_vec();
    expected.sort_unstable();
    if names != expected {
        return Err(Error::Integrity(format!(
            "{}: bundle members are {names:?}, expected {expected:?}",
            path.display()
        )));
    }

    let manifest: Manifest = serde_json::from_slice(&member(&mut zip, MANIFEST)?)
        .map_err(|e| Error::Integrity(format!("manifest.json: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Integrity(format!(
            "unsupported bundle format version {}",
            manifest.format_version
        )));
    }
    let d = manifest.dim;

    let mean = npy::parse_npy(&member(&mut zip, MEAN)?)?;
    if mean.shape != [d] {
        return Err(Error::Integrity(format!(
            "mean.npy has shape {:?}, manifest dim is {d}",
            mean.shape
        )));
    }
    let w = square(npy::parse_npy(&member(&mut zip, W)?)?, d, W)?;
    let w_inv = square(npy::parse_npy(&member(&mut zip, W_INV)?)?, d, W_INV)?;

    WhiteningModel::from_parts(
        DVector::from_vec(mean.values),
        w,
        w_inv,
        manifest.tau,
        manifest.dropped_features,
        manifest.noise_seed,
        manifest.noise_variance,
        manifest
            .eig_floor
            .unwrap_or(FitOptions::default().eig_floor),
        manifest.clamped_eigenvalues.unwrap_or(0),
        manifest.n_fit_samples,
        manifest.created_utc,
    )
}

fn member(zip: &mut ZipArchive<Cursor<Vec<u8>>>, name: &str) -> Result<Vec<u8>> {
    let mut file = zip
        .by_name(name)
        .map_err(|e| Error::Integrity(format!("bundle member {name}: {e}")))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)
        .map_err(|e| Error::Format(format!("bundle member {name}: {e}")))?;
    Ok(buf)
}

fn square(arr: npy::NpyArray, d: usize, name: &str) -> Result<DMatrix<f64>> {
    if arr.shape != [d, d] {
        return Err(Error::Integrity(format!(
            "{name} has shape {:?}, manifest dim is {d}",
            arr.shape
        )));
    }
    Ok(DMatrix::from_row_slice(d, d, &arr.values))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}
