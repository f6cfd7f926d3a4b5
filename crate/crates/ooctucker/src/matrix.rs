//! Dense column-major matrices.
//!
//! Columns are contiguous: entry `(r, c)` lives at `r + rows * c`. This is
//! the same layout rule as [`crate::tensor::DenseTensor`] restricted to two
//! modes, so a matricized tensor and a matrix share their linearization.

use crate::error::{Error, Result};
use crate::mem::{MemClass, TrackedBuf};

/// Dense real matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: TrackedBuf<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: TrackedBuf::zeroed(MemClass::Dense, rows * cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from a column-major value buffer.
    pub fn from_col_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix buffer has {} values, expected {}x{}",
                values.len(),
                rows,
                cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            data: TrackedBuf::from_vec(MemClass::Dense, values),
        })
    }

    /// Builds from rows given in row-major order (convenient in tests).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r + self.rows * c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r + self.rows * c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r + self.rows * c] += v;
    }

    /// Contiguous view of column `c`.
    #[inline]
    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[self.rows * c..self.rows * (c + 1)]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[self.rows * c..self.rows * (c + 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    fn check_mul(a_cols: usize, b_rows: usize) -> Result<()> {
        if a_cols != b_rows {
            return Err(Error::Shape(format!(
                "matrix product inner dimensions differ: {} vs {}",
                a_cols, b_rows
            )));
        }
        Ok(())
    }

    /// `self * other`.
    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        Self::check_mul(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let bcol = other.col(j);
            let ocol = out.col_mut(j);
            for (l, &b) in bcol.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let acol = self.col(l);
                for (i, &a) in acol.iter().enumerate() {
                    ocol[i] += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`.
    pub fn tr_mul(&self, other: &Matrix) -> Result<Matrix> {
        Self::check_mul(self.rows, other.rows)?;
        let mut out = Matrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let bcol = other.col(j);
            for i in 0..self.cols {
                let acol = self.col(i);
                let mut acc = 0.0;
                for (a, b) in acol.iter().zip(bcol.iter()) {
                    acc += a * b;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`.
    pub fn mul_tr(&self, other: &Matrix) -> Result<Matrix> {
        Self::check_mul(self.cols, other.cols)?;
        let mut out = Matrix::zeros(self.rows, other.rows);
        for l in 0..self.cols {
            let acol = self.col(l);
            let bcol = other.col(l);
            for (j, &b) in bcol.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let ocol = out.col_mut(j);
                for (i, &a) in acol.iter().enumerate() {
                    ocol[i] += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self += t * tᵀ`, without materializing the product.
    pub fn add_aat(&mut self, t: &Matrix) -> Result<()> {
        if self.rows != t.rows || self.cols != t.rows {
            return Err(Error::Shape(format!(
                "gram accumulation target is {}x{}, expected {}x{}",
                self.rows, self.cols, t.rows, t.rows
            )));
        }
        for l in 0..t.cols {
            let tcol = t.col(l);
            for (j, &b) in tcol.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let ocol = self.col_mut(j);
                for (i, &a) in tcol.iter().enumerate() {
                    ocol[i] += a * b;
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.data.iter_mut() {
            *v *= s;
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `‖selfᵀ·self − I‖_max`, the orthonormality defect of the columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut acc = 0.0;
                for (a, b) in self.col(i).iter().zip(self.col(j).iter()) {
                    acc += a * b;
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}
