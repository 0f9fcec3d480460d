use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// An `N x d` matrix of embeddings, one sample per row.
///
/// Always non-empty and finite; every constructor checks both.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: DMatrix<f64>,
}

impl EmbeddingMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Validation(format!(
                "embedding matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        // column-major storage: index -> (row, col)
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % data.nrows(), idx / data.nrows());
            return Err(Error::Validation(format!(
                "non-finite value {} at row {row}, column {col}",
                data[(row, col)]
            )));
        }
        Ok(Self { data })
    }

    /// Builds a matrix from row-major values.
    pub fn from_row_slice(n_samples: usize, dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n_samples * dim {
            return Err(Error::Validation(format!(
                "{} values cannot fill a {n_samples}x{dim} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n_samples, dim, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Validation(format!(
                "row {i} has {} columns, expected {dim}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), dim, &flat)
    }

    /// A single sample as a `1 x d` matrix.
    pub fn from_vector(v: &[f64]) -> Result<Self> {
        Self::from_row_slice(1, v.len(), v)
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.data.row(i).into_owned()
    }

    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.data.column(j).into_owned()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.n_samples()).map(move |i| self.row_vec(i))
    }

    /// Values in row-major (C) order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.data.transpose().as_slice().to_vec()
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.data.row_iter().map(|r| r.norm()).collect()
    }

    pub(crate) fn ensure_dim(&self, dim: usize, what: &str) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::Validation(format!(
                "{what}: dimension mismatch, expected {dim}, got {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Validation(format!(
            "{what}: non-finite value {} at index {i}",
            values[i]
        ))),
        None => Ok(()),
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
