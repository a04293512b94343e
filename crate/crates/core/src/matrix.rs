//! Row-major dense matrices and the elementwise operations the rest of the
//! crate is built on.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
///
/// Dimensions are always positive and every entry is finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list().entries(self.data.chunks(self.cols)).finish()?;
        }
        Ok(())
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<usize> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    rows.checked_mul(cols)
        .ok_or_else(|| Error::Dimension(format!("{rows}x{cols} overflows usize")))
}

impl DenseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let len = check_dims(rows, cols)?;
        if data.len() != len {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {len} entries, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite entry {} at ({}, {})",
                data[pos],
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_vec(m, n, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        let len = check_dims(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            data: vec![0.0; len],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut m = Self::zeros(n, n)?;
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Builds a matrix from an entry function, rows evaluated in parallel.
    ///
    /// Each entry is computed independently, so the result does not depend on
    /// the thread count.
    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let len = check_dims(rows, cols)?;
        let mut data = vec![0.0; len];
        data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
            for (j, x) in row.iter_mut().enumerate() {
                *x = f(i, j);
            }
        });
        Self::from_vec(rows, cols, data)
    }

    /// Fallible variant of [`DenseMatrix::from_fn`]; the first error by row
    /// index is returned.
    pub fn try_from_fn<F>(rows: usize, cols: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        check_dims(rows, cols)?;
        let rows_data: Vec<Vec<f64>> = (0..rows)
            .into_par_iter()
            .map(|i| (0..cols).map(|j| f(i, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Self::from_vec(rows, cols, rows_data.concat())
    }

    /// Wraps a buffer that is known to be finite; used by internal kernels.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { rows, cols, data }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(pos) => Err(Error::Numerical(format!(
                "non-finite entry at ({}, {})",
                pos / self.cols,
                pos % self.cols
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let (m, n) = self.shape();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.data[i * n + j];
            }
        }
        Self::from_vec_unchecked(n, m, data)
    }

    /// `self * rhs`, parallel over output rows with a fixed summation order.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let n = rhs.cols;
        let mut out = vec![0.0; self.rows * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, orow)| {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        });
        let out = Self::from_vec_unchecked(self.rows, n, out);
        out.check_finite()?;
        Ok(out)
    }

    /// `self * rhsᵀ` without materializing the transpose.
    pub fn matmul_transposed(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by transpose of {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let n = rhs.rows;
        let mut out = vec![0.0; self.rows * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, orow)| {
            let a = self.row(i);
            for (j, o) in orow.iter_mut().enumerate() {
                *o = dot(a, rhs.row(j));
            }
        });
        let out = Self::from_vec_unchecked(self.rows, n, out);
        out.check_finite()?;
        Ok(out)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::Dimension(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        let out = Self::from_vec_unchecked(self.rows, self.cols, data);
        out.check_finite()?;
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Maximum absolute entry, `‖X‖_max`.
pub fn max_abs_norm(x: &DenseMatrix) -> f64 {
    x.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `‖a − b‖_max` without allocating the difference.
pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "shape mismatch {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.data
        .iter()
        .zip(&b.data)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs())))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
