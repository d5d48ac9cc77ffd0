//! Row-major sample storage and the model abstraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GsaError, Result};

/// `n × d` matrix of input points stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(GsaError::InvalidArgument(format!(
                "{} values cannot fill a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(GsaError::InvalidArgument("rows have different lengths".into()));
        }
        Ok(Self { nrows: rows.len(), ncols, data: rows.concat() })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty slice with ncols = 0 would panic
        (0..self.nrows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &SampleMatrix) -> Result<SampleMatrix> {
        if self.ncols != other.ncols {
            return Err(GsaError::InvalidArgument("column counts differ".into()));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(SampleMatrix { nrows: self.nrows + other.nrows, ncols: self.ncols, data })
    }
}

/// A deterministic simulator `y = η(x)`.
pub trait Model: Sync {
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F> Model for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Evaluates the model on every row. Non-finite outputs are reported with
/// the offending row.
pub fn evaluate<M: Model + ?Sized>(model: &M, x: &SampleMatrix) -> Result<Vec<f64>> {
    let y: Vec<f64> = (0..x.nrows()).into_par_iter().map(|i| model.eval(x.row(i))).collect();
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(GsaError::ModelEvaluation { row, input: x.row(row).to_vec(), output: y[row] });
    }
    Ok(y)
}
