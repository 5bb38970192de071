use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// One observed column: a feature or the response. Always finite, length ≥ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample(Array1<f64>);

impl Sample {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "a sample needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at row {i}")));
        }
        Ok(Sample(values))
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(Array1::from(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("sample storage is contiguous")
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Sample> {
        Sample::new(rows.iter().map(|&i| self.0[i]).collect())
    }

    pub fn concat(&self, other: &Sample) -> Sample {
        Sample(self.0.iter().chain(other.0.iter()).copied().collect())
    }
}

/// An n×p observation matrix (rows are observations). All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(Array2<f64>);

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {i}, column {j}"
            )));
        }
        Ok(DataMatrix(values))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ndarray::ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn column(&self, k: usize) -> Result<Sample> {
        Sample::new(self.0.column(k).to_owned())
    }

    pub fn columns(&self) -> Result<Vec<Sample>> {
        (0..self.ncols()).map(|k| self.column(k)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix(self.0.select(Axis(0), rows))
    }

    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        DataMatrix(self.0.select(Axis(1), cols))
    }

    /// Row-stack `self` on top of `other`.
    pub fn vstack(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if self.ncols() != other.ncols() {
            return Err(Error::invalid(format!(
                "cannot stack {} columns on {} columns",
                self.ncols(),
                other.ncols()
            )));
        }
        let stacked = ndarray::concatenate(Axis(0), &[self.0.view(), other.0.view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(DataMatrix(stacked))
    }
}
