//! Paired input/output samples.
//!
//! A [`SampleMatrix`] holds N realizations (rows) of a real random vector
//! (columns). A [`SensitivityDataset`] pairs an input matrix `x` (N x d) with
//! the model outputs `y` (N x k) computed row by row. Both types validate on
//! construction and are immutable afterwards.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Dense matrix of finite reals with one unique label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: Array2<f64>,
    names: Vec<String>,
}

impl SampleMatrix {
    /// Validates `values` and attaches `names`.
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows < 2 || cols < 1 {
            return Err(Error::TooSmall { rows, cols });
        }
        if names.len() != cols {
            return Err(Error::NameCount { expected: cols, got: names.len() });
        }
        let mut seen = HashSet::with_capacity(cols);
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        for ((row, col), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self { values, names })
    }

    /// Like [`SampleMatrix::new`] with names `{prefix}1..{prefix}n`.
    pub fn with_default_names(values: Array2<f64>, prefix: &str) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("{prefix}{j}")).collect();
        Self::new(values, names)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Index of the column called `name`.
    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// New matrix made of the given rows, in order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> SampleMatrix {
        SampleMatrix {
            values: self.values.select(Axis(0), rows),
            names: self.names.clone(),
        }
    }

    /// New matrix keeping only the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> SampleMatrix {
        SampleMatrix {
            values: self.values.select(Axis(1), cols),
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
        }
    }

    /// Applies `f` entrywise. Fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SampleMatrix> {
        SampleMatrix::new(self.values.mapv(f), self.names.clone())
    }
}

/// Row-paired inputs and outputs: row j of `y` is the model response to row j of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityDataset {
    x: SampleMatrix,
    y: SampleMatrix,
}

impl SensitivityDataset {
    pub fn new(x: SampleMatrix, y: SampleMatrix) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::RowMismatch { x: x.nrows(), y: y.nrows() });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &SampleMatrix {
        &self.x
    }

    pub fn y(&self) -> &SampleMatrix {
        &self.y
    }

    /// Sample size N.
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of inputs d.
    pub fn input_dim(&self) -> usize {
        self.x.ncols()
    }

    /// Number of outputs k.
    pub fn output_dim(&self) -> usize {
        self.y.ncols()
    }

    /// Jointly resamples rows of `x` and `y`.
    pub fn select_rows(&self, rows: &[usize]) -> SensitivityDataset {
        SensitivityDataset { x: self.x.select_rows(rows), y: self.y.select_rows(rows) }
    }

    /// Same inputs, different outputs (row count must match).
    pub fn with_outputs(&self, y: SampleMatrix) -> Result<SensitivityDataset> {
        SensitivityDataset::new(self.x.clone(), y)
    }
}

/// Builds a [`SensitivityDataset`] from raw values, checking every invariant.
pub fn validate_dataset(x: SampleMatrix, y: SampleMatrix) -> Result<SensitivityDataset> {
    SensitivityDataset::new(x, y)
}
