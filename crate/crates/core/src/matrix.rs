//! Dense matrices, the N x T data matrix, standardization, correlation and
//! the 2-norm condition number.

use std::collections::HashSet;

use serde::Serialize;

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};

/// Relative threshold below which the smallest singular value counts as zero.
pub const EPS_RANK: f64 = 1e-12;

/// Largest |row mean| accepted by [`correlation_matrix`].
pub const STANDARDIZED_MEAN_TOL: f64 = 1e-6;

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch { expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * selfᵀ`, the Gram matrix of the rows.
    pub fn gram_rows(&self) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// N variables (rows) by T samples (columns) of finite real values.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    row_labels: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        Self::with_labels(values, None)
    }

    pub fn with_labels(values: Matrix, row_labels: Option<Vec<String>>) -> Result<Self> {
        if values.rows() < 2 || values.cols() < 2 {
            return Err(Error::TooSmall { rows: values.rows(), cols: values.cols() });
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / values.cols(), col: pos % values.cols() });
        }
        if let Some(labels) = &row_labels {
            if labels.len() != values.rows() {
                return Err(Error::InvalidLabels(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    values.rows()
                )));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
                return Err(Error::InvalidLabels(format!("duplicate label {dup:?}")));
            }
        }
        Ok(Self { values, row_labels })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn n_vars(&self) -> usize {
        self.values.rows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    /// Swap variables and samples. Labels are dropped.
    pub fn transposed(&self) -> Result<DataMatrix> {
        DataMatrix::new(self.values.transpose())
    }

    /// Replace the values, keeping the labels.
    pub fn map_values(&self, values: Matrix) -> Result<DataMatrix> {
        if values.rows() != self.n_vars() {
            return Err(Error::DimensionMismatch(values.rows(), self.n_vars()));
        }
        DataMatrix::with_labels(values, self.row_labels.clone())
    }
}

/// Mean and population (1/T) standard deviation of a row.
pub fn row_moments(row: &[f64]) -> (f64, f64) {
    let t = row.len() as f64;
    let mean = row.iter().sum::<f64>() / t;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t;
    (mean, var.sqrt())
}

/// Center every row and scale it to unit population standard deviation.
pub fn standardize(m: &DataMatrix) -> Result<DataMatrix> {
    let mut out = m.values().clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let (mean, sd) = row_moments(row);
        // a constant row leaves only rounding noise after centering
        let scale = row.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if sd == 0.0 || sd <= 1e-14 * scale {
            return Err(Error::ZeroVarianceRow(i));
        }
        for v in row.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    m.map_values(out)
}

/// Correlation matrix `Y Yᵀ / T` of a standardized matrix.
pub fn correlation_matrix(m: &DataMatrix) -> Result<Matrix> {
    for (i, row) in m.values().iter_rows().enumerate() {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        if mean.abs() > STANDARDIZED_MEAN_TOL {
            return Err(Error::NotStandardized { row: i, mean });
        }
    }
    let t = m.n_samples() as f64;
    let mut c = m.values().gram_rows().scale(1.0 / t);
    for i in 0..c.rows() {
        c[(i, i)] = 1.0;
    }
    Ok(c)
}

/// Largest and smallest singular values and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    /// Largest singular value.
    #[serde(serialize_with = "crate::report::ser_sig6")]
    pub lambda_max: f64,
    /// Smallest singular value.
    #[serde(serialize_with = "crate::report::ser_sig6")]
    pub lambda_min: f64,
    /// `lambda_max / lambda_min`, infinite when rank deficient.
    #[serde(serialize_with = "crate::report::ser_sig6")]
    pub condition_number: f64,
    pub rank_deficient: bool,
}

/// 2-norm condition number of a rectangular matrix, from the eigenvalues of
/// the Gram matrix of its shorter dimension.
pub fn condition_number(m: &Matrix) -> Result<ConditionReport> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::TooSmall { rows: m.rows(), cols: m.cols() });
    }
    let gram = if m.rows() <= m.cols() { m.gram_rows() } else { m.transpose().gram_rows() };
    let spectrum = symmetric_eigen(&gram)?;
    let eig = spectrum.eigenvalues();
    let sigma_max = eig[0].max(0.0).sqrt();
    let sigma_min = eig[eig.len() - 1].max(0.0).sqrt();
    let rank_deficient = sigma_max == 0.0 || sigma_min <= EPS_RANK * sigma_max;
    let condition_number = if rank_deficient { f64::INFINITY } else { (sigma_max / sigma_min).max(1.0) };
    Ok(ConditionReport { lambda_max: sigma_max, lambda_min: sigma_min, condition_number, rank_deficient })
}
