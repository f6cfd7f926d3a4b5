//! Dense tensors of order 2 to 4 and the multilinear operations every
//! decomposition here is built from: matricization, n-mode products, the
//! Tucker operator, Frobenius norms and the fit metric.
//!
//! # Layout
//!
//! Values live in one flat buffer with **mode 0 varying fastest**: the entry
//! at multi-index `(i0, i1, i2)` of an `I0 x I1 x I2` tensor sits at offset
//! `i0 + I0 * (i1 + I1 * i2)`. Matricization keeps the same rule: column `j`
//! of the mode-`n` unfolding enumerates the non-`n` indices with the
//! lowest-numbered mode varying fastest, so for mode 0 the unfolding is a
//! plain reshape of the buffer.
//!
//! ```
//! use ooctucker::tensor::DenseTensor;
//!
//! let x = DenseTensor::from_vec(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
//! assert_eq!(x.get(&[1, 0, 1]), 6.0);           // 1 + 2*(0 + 2*1)  -> 6th value
//! assert_eq!(x.frobenius_norm(), 204f64.sqrt());
//! let unfolded = x.matricize(0).unwrap();
//! assert_eq!((unfolded.rows(), unfolded.cols()), (2, 4));
//! ```

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mem::{MemClass, TrackedBuf};

/// Maximum tensor order handled by this crate.
pub const MAX_ORDER: usize = 4;

/// Dense real tensor of order 2, 3 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: TrackedBuf<f64>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if !(2..=MAX_ORDER).contains(&dims.len()) {
        return Err(Error::UnsupportedOrder(dims.len()));
    }
    if dims.contains(&0) {
        return Err(Error::Shape("tensor dimensions must be positive".into()));
    }
    Ok(())
}

impl DenseTensor {
    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims)?;
        let len = dims.iter().product();
        Ok(Self {
            dims,
            data: TrackedBuf::zeroed(MemClass::Dense, len),
        })
    }

    pub fn from_vec(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if values.len() != len {
            return Err(Error::Shape(format!(
                "buffer has {} values but dims {:?} require {}",
                values.len(),
                dims,
                len
            )));
        }
        Ok(Self {
            dims,
            data: TrackedBuf::from_vec(MemClass::Dense, values),
        })
    }

    /// A 2nd-order tensor sharing the matrix layout bit for bit.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self::from_vec(vec![m.rows(), m.cols()], m.values().to_vec()).expect("matrix dims")
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Stride of `mode` in the flat buffer.
    pub fn stride(&self, mode: usize) -> usize {
        self.dims[..mode].iter().product()
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order());
        let mut off = 0;
        let mut stride = 1;
        for (m, &i) in index.iter().enumerate() {
            debug_assert!(i < self.dims[m]);
            off += i * stride;
            stride *= self.dims[m];
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], v: f64) {
        let off = self.offset(index);
        self.data[off] = v;
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-`n` unfolding: an `I_n x (prod of the rest)` matrix whose column
    /// `j` is the mode-`n` fiber at the `j`-th combination of the remaining
    /// indices, lower-numbered modes varying fastest.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let n = self.order();
        let rows = self.dims[mode];
        let cols = self.len() / rows;
        let mut out = Matrix::zeros(rows, cols);

        // Column stride of each non-`mode` mode in the unfolding.
        let mut col_strides = [0usize; MAX_ORDER];
        let mut acc = 1;
        for m in 0..n {
            if m == mode {
                continue;
            }
            col_strides[m] = acc;
            acc *= self.dims[m];
        }

        let mut index = [0usize; MAX_ORDER];
        for (off, &v) in self.data.iter().enumerate() {
            // Decompose the flat offset; mode 0 varies fastest.
            let mut rem = off;
            for m in 0..n {
                index[m] = rem % self.dims[m];
                rem /= self.dims[m];
            }
            let mut col = 0;
            for m in 0..n {
                if m != mode {
                    col += index[m] * col_strides[m];
                }
            }
            out.set(index[mode], col, v);
        }
        Ok(out)
    }

    /// Inverse of [`matricize`](Self::matricize):
    /// `fold(x.matricize(n), n, x.dims()) == x` exactly.
    pub fn fold(m: &Matrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
        check_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::InvalidMode {
                mode,
                order: dims.len(),
            });
        }
        let total: usize = dims.iter().product();
        if m.rows() != dims[mode] || m.cols() != total / dims[mode] {
            return Err(Error::Shape(format!(
                "cannot fold {}x{} matrix into mode {} of {:?}",
                m.rows(),
                m.cols(),
                mode,
                dims
            )));
        }
        let n = dims.len();
        let mut out = DenseTensor::zeros(dims.to_vec())?;

        let mut col_strides = [0usize; MAX_ORDER];
        let mut acc = 1;
        for d in 0..n {
            if d == mode {
                continue;
            }
            col_strides[d] = acc;
            acc *= dims[d];
        }

        let mut index = [0usize; MAX_ORDER];
        for off in 0..total {
            let mut rem = off;
            for d in 0..n {
                index[d] = rem % dims[d];
                rem /= dims[d];
            }
            let mut col = 0;
            for d in 0..n {
                if d != mode {
                    col += index[d] * col_strides[d];
                }
            }
            out.data[off] = m.get(index[mode], col);
        }
        Ok(out)
    }

    /// n-mode product `self ×_mode a`: every mode-`mode` fiber is multiplied
    /// by the rows of `a`, replacing dimension `I_mode` with `a.rows()`.
    ///
    /// Computed by direct summation over the mode index rather than through
    /// the unfolding, so tests can cross-check it against the
    /// matricize-multiply-fold route.
    pub fn n_mode_product(&self, a: &Matrix, mode: usize) -> Result<DenseTensor> {
        self.check_mode(mode)?;
        if a.cols() != self.dims[mode] {
            return Err(Error::Shape(format!(
                "mode-{} product needs {} columns, matrix has {}",
                mode,
                self.dims[mode],
                a.cols()
            )));
        }
        let mut out_dims = self.dims.clone();
        out_dims[mode] = a.rows();
        let mut out = DenseTensor::zeros(out_dims)?;

        let stride = self.stride(mode);
        let in_dim = self.dims[mode];
        let out_dim = a.rows();
        let in_block = stride * in_dim;
        let out_block = stride * out_dim;
        let nblocks = self.len() / in_block;

        for blk in 0..nblocks {
            let in_base = blk * in_block;
            let out_base = blk * out_block;
            for j in 0..out_dim {
                for inner in 0..stride {
                    let mut acc = 0.0;
                    for i in 0..in_dim {
                        acc += self.data[in_base + i * stride + inner] * a.get(j, i);
                    }
                    out.data[out_base + j * stride + inner] = acc;
                }
            }
        }
        Ok(out)
    }

    /// Tucker operator: successive n-mode products with one factor per mode,
    /// applied in mode order `0..N`.
    pub fn tucker_apply(&self, factors: &[&Matrix]) -> Result<DenseTensor> {
        if factors.len() != self.order() {
            return Err(Error::Shape(format!(
                "{} factors supplied for an order-{} tensor",
                factors.len(),
                self.order()
            )));
        }
        let mut cur = self.clone();
        for (mode, f) in factors.iter().enumerate() {
            cur = cur.n_mode_product(f, mode)?;
        }
        Ok(cur)
    }

    /// `⟦self; F0ᵀ, …⟧` with identity in the `None` modes. This is the
    /// projection used to form cores and the HOOI intermediates.
    pub fn project_transposed(&self, factors: &[Option<&Matrix>]) -> Result<DenseTensor> {
        if factors.len() != self.order() {
            return Err(Error::Shape(format!(
                "{} factors supplied for an order-{} tensor",
                factors.len(),
                self.order()
            )));
        }
        let mut cur = self.clone();
        for (mode, f) in factors.iter().enumerate() {
            if let Some(f) = f {
                cur = cur.n_mode_product(&f.transpose(), mode)?;
            }
        }
        Ok(cur)
    }

    /// Matrix slice with all modes in `fixed` pinned; exactly two modes must
    /// remain, the lower one becoming rows.
    pub fn slice_matrix(&self, fixed: &[(usize, usize)]) -> Result<Matrix> {
        let n = self.order();
        if fixed.len() + 2 != n {
            return Err(Error::Shape(format!(
                "fixing {} modes of an order-{} tensor does not leave a matrix",
                fixed.len(),
                n
            )));
        }
        let mut index = [usize::MAX; MAX_ORDER];
        for &(m, i) in fixed {
            self.check_mode(m)?;
            if i >= self.dims[m] {
                return Err(Error::Shape(format!(
                    "slice index {} out of range for mode {} of size {}",
                    i, m, self.dims[m]
                )));
            }
            index[m] = i;
        }
        let free: Vec<usize> = (0..n).filter(|m| index[*m] == usize::MAX).collect();
        let (rm, cm) = (free[0], free[1]);
        let mut out = Matrix::zeros(self.dims[rm], self.dims[cm]);
        let mut idx = [0usize; MAX_ORDER];
        for (m, &v) in index.iter().enumerate().take(n) {
            if v != usize::MAX {
                idx[m] = v;
            }
        }
        for c in 0..self.dims[cm] {
            idx[cm] = c;
            for r in 0..self.dims[rm] {
                idx[rm] = r;
                out.set(r, c, self.get(&idx[..n]));
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sq_norm().sqrt()
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Reconstruction accuracy `1 − ‖x − x̂‖_F / ‖x‖_F`.
///
/// Equals 1 exactly when `x == x̂`, and may be negative for particularly poor
/// reconstructions. Errors when `x` has zero norm.
pub fn fit(x: &DenseTensor, xhat: &DenseTensor) -> Result<f64> {
    if x.dims() != xhat.dims() {
        return Err(Error::Shape(format!(
            "fit of {:?} against {:?}",
            x.dims(),
            xhat.dims()
        )));
    }
    let denom = x.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroNorm("fit denominator".into()));
    }
    let mut err = 0.0;
    for (a, b) in x.values().iter().zip(xhat.values().iter()) {
        let d = a - b;
        err += d * d;
    }
    Ok(1.0 - err.sqrt() / denom)
}
