//! Embedding files (NPY, CSV) and persisted whitening models.

mod bundle;
pub mod npy;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use bundle::{load_model, save_model, Manifest, FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorFormat {
    Npy,
    Csv,
}

impl TensorFormat {
    /// Picks the format from the file extension (`.npy` or `.csv`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("npy") => Ok(TensorFormat::Npy),
            Some("csv") => Ok(TensorFormat::Csv),
            _ => Err(Error::Validation(format!(
                "cannot infer tensor format from {}; expected .npy or .csv",
                path.display()
            ))),
        }
    }
}

pub fn read_embeddings(path: &Path, format: TensorFormat) -> Result<EmbeddingMatrix> {
    match format {
        TensorFormat::Npy => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let arr = npy::parse_npy(&bytes)?;
            if !arr.dtype.is_float() {
                return Err(Error::Format(format!(
                    "{}: embeddings must be float32 or float64",
                    path.display()
                )));
            }
            let (n, d) = match arr.shape[..] {
                [d] => (1, d),
                [n, d] => (n, d),
                _ => {
                    return Err(Error::Format(format!(
                        "{}: expected a 1-D or 2-D array, got shape {:?}",
                        path.display(),
                        arr.shape
                    )))
                }
            };
            EmbeddingMatrix::from_row_slice(n, d, &arr.values)
        }
        TensorFormat::Csv => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let table = read_csv_table(file)?;
            EmbeddingMatrix::from_rows(&table.rows)
        }
    }
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path, format: TensorFormat) -> Result<()> {
    atomic_write(path, |w| match format {
        TensorFormat::Npy => npy::write_npy(w, &[m.n_samples(), m.dim()], &m.to_row_major()),
        TensorFormat::Csv => {
            for row in m.rows() {
                let line: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            Ok(())
        }
    })
}

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A numeric CSV table with an optional header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.as_ref()?.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Parses a numeric CSV. The first record is a header iff any of its cells is
/// not a number.
pub fn read_csv_table<R: std::io::Read>(reader: R) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: line + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if line == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    row: line + 1,
                    column: col + 1,
                    message: format!("not a number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// Reads a list of scalars: a single-column NPY/CSV, or one named column of a
/// CSV with a header. Without a column name a multi-column CSV yields its last
/// column.
pub fn read_values(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let values = match TensorFormat::from_path(path)? {
        TensorFormat::Npy => {
            let m = read_embeddings(path, TensorFormat::Npy)?;
            if m.n_samples() == 1 || m.dim() == 1 {
                m.to_row_major()
            } else {
                return Err(Error::Validation(format!(
                    "{}: expected a vector, got a {}x{} matrix",
                    path.display(),
                    m.n_samples(),
                    m.dim()
                )));
            }
        }
        TensorFormat::Csv => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let table = read_csv_table(file)?;
            match column {
                Some(name) => table.column(name).ok_or_else(|| {
                    Error::Validation(format!("{}: no column named {name:?}", path.display()))
                })?,
                None => table
                    .rows
                    .iter()
                    .map(|r| {
                        r.last().copied().ok_or_else(|| {
                            Error::Validation(format!("{}: empty row", path.display()))
                        })
                    })
                    .collect::<Result<_>>()?,
            }
        }
    };
    crate::matrix::ensure_finite(&values, &path.display().to_string())?;
    Ok(values)
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed write never leaves a partial file behind.
pub fn atomic_write<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut tempfile::NamedTempFile>) -> std::io::Result<()>,
{
    let mut tmp = staged_write(path, write)?;
    tmp.as_file_mut()
        .sync_all()
        .map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Like [`atomic_write`] but leaves the rename to the caller, for commands
/// that must publish several files together.
pub fn staged_write<F>(path: &Path, write: F) -> Result<tempfile::NamedTempFile>
where
    F: FnOnce(&mut BufWriter<&mut tempfile::NamedTempFile>) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".whitex-")
        .tempfile_in(dir)
        .map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(&mut tmp);
        write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(tmp)
}
