//! Sparse tensors in coordinate format.
//!
//! The interchange format is a plain text file with one line per nonzero:
//! `N` 1-based integer indices followed by one decimal value, separated by
//! whitespace, LF or CRLF line endings. Keeping the input as text is what
//! makes the external sort in [`crate::extsort`] possible.
//!
//! [`CooFile`] is a validated descriptor of such a file; [`CooTensor`] holds
//! the records in RAM (indices rebased to 0) for the algorithms that need
//! random access, and knows how to form mode Grams and multilinear
//! projections directly from the nonzeros without densifying the tensor.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mem::{MemClass, TrackedBuf};
use crate::tensor::{DenseTensor, MAX_ORDER};

/// One nonzero: 1-based indices and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooRecord {
    pub indices: [u32; MAX_ORDER],
    pub value: f64,
}

/// A validated coordinate text file.
#[derive(Debug, Clone)]
pub struct CooFile {
    pub path: PathBuf,
    pub dims: Vec<usize>,
    /// Records with a nonzero value.
    pub nnz: u64,
    /// All records, including explicit zeros (legal on read, dropped on
    /// store).
    pub records: u64,
    /// Sum of squared values.
    pub sq_norm: f64,
}

pub(crate) fn parse_line(
    path: &Path,
    line_no: u64,
    line: &str,
    dims: &[usize],
) -> Result<CooRecord> {
    let n = dims.len();
    let mut tokens = line.split_whitespace();
    let mut indices = [0u32; MAX_ORDER];
    for (m, slot) in indices.iter_mut().enumerate().take(n) {
        let tok = tokens.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("expected {} indices and a value", n),
        })?;
        let idx: u64 = tok.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("index field {} is not an integer: {:?}", m + 1, tok),
        })?;
        if idx < 1 || idx > dims[m] as u64 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!(
                    "index {} out of range 1..={} in mode {}",
                    idx,
                    dims[m],
                    m + 1
                ),
            });
        }
        *slot = idx as u32;
    }
    let tok = tokens.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        msg: "missing value field".into(),
    })?;
    let value: f64 = tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        msg: format!("value is not a number: {:?}", tok),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("value is not finite: {}", value),
        });
    }
    if tokens.next().is_some() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: "trailing fields after the value".into(),
        });
    }
    Ok(CooRecord { indices, value })
}

fn pack_key(indices: &[u32; MAX_ORDER]) -> u128 {
    let mut key = 0u128;
    for &i in indices {
        key = (key << 32) | i as u128;
    }
    key
}

/// Scans and validates a coordinate file against declared dimensions.
///
/// Every line must parse, every index must be in range and no coordinate
/// tuple may repeat. Malformed lines are reported with their line number.
pub fn parse_coo(path: impl Into<PathBuf>, dims: &[usize]) -> Result<CooFile> {
    let path = path.into();
    if !(2..=MAX_ORDER).contains(&dims.len()) {
        return Err(Error::UnsupportedOrder(dims.len()));
    }
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let reader = BufReader::new(file);

    let mut nnz = 0u64;
    let mut records = 0u64;
    let mut sq_norm = 0.0f64;
    let mut seen: HashSet<u128> = HashSet::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_line(&path, line_no, &line, dims)?;
        if !seen.insert(pack_key(&rec.indices)) {
            return Err(Error::DuplicateCoordinates {
                path: path.clone(),
                line: line_no,
            });
        }
        records += 1;
        if rec.value != 0.0 {
            nnz += 1;
            sq_norm += rec.value * rec.value;
        }
    }

    Ok(CooFile {
        path,
        dims: dims.to_vec(),
        nnz,
        records,
        sq_norm,
    })
}

/// Streams records to a coordinate text file (1-based indices, LF endings).
/// Values are written in shortest round-trip form, so a rewrite of parsed
/// data is value-exact.
pub fn write_coo_text<I>(path: &Path, order: usize, records: I) -> Result<u64>
where
    I: IntoIterator<Item = ([u32; MAX_ORDER], f64)>,
{
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut lines = 0u64;
    for (indices, value) in records {
        for &i in indices.iter().take(order) {
            write!(w, "{} ", i).map_err(|e| Error::io(path, e))?;
        }
        writeln!(w, "{}", value).map_err(|e| Error::io(path, e))?;
        lines += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(lines)
}

/// Coordinate records held in RAM, indices rebased to 0. Zero-valued records
/// are dropped on load.
#[derive(Debug)]
pub struct CooTensor {
    dims: Vec<usize>,
    /// Flattened indices, `order` entries per record.
    indices: TrackedBuf<u32>,
    values: TrackedBuf<f64>,
}

impl CooTensor {
    /// Loads a validated [`CooFile`] into RAM.
    pub fn read(file: &CooFile) -> Result<Self> {
        let n = file.dims.len();
        let f = std::fs::File::open(&file.path).map_err(|e| Error::io(&file.path, e))?;
        let reader = BufReader::new(f);
        let mut indices = TrackedBuf::with_capacity(MemClass::Coo, file.nnz as usize * n);
        let mut values = TrackedBuf::with_capacity(MemClass::Coo, file.nnz as usize);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&file.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = parse_line(&file.path, i as u64 + 1, &line, &file.dims)?;
            if rec.value == 0.0 {
                continue;
            }
            for m in 0..n {
                indices.push(rec.indices[m] - 1);
            }
            values.push(rec.value);
        }
        Ok(Self {
            dims: file.dims.clone(),
            indices,
            values,
        })
    }

    /// Builds from in-memory records (0-based indices).
    pub fn from_entries(dims: Vec<usize>, entries: &[([u32; MAX_ORDER], f64)]) -> Result<Self> {
        let n = dims.len();
        if !(2..=MAX_ORDER).contains(&n) {
            return Err(Error::UnsupportedOrder(n));
        }
        let mut indices = TrackedBuf::with_capacity(MemClass::Coo, entries.len() * n);
        let mut values = TrackedBuf::with_capacity(MemClass::Coo, entries.len());
        for (idx, v) in entries {
            if *v == 0.0 {
                continue;
            }
            for m in 0..n {
                if idx[m] as usize >= dims[m] {
                    return Err(Error::Shape(format!(
                        "index {} out of range for mode {} of size {}",
                        idx[m], m, dims[m]
                    )));
                }
                indices.push(idx[m]);
            }
            values.push(*v);
        }
        Ok(Self {
            dims,
            indices,
            values,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    #[inline]
    fn record_indices(&self, r: usize) -> &[u32] {
        let n = self.order();
        &self.indices[r * n..(r + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        (0..self.nnz()).map(|r| (self.record_indices(r), self.values[r]))
    }

    /// `X_(n) X_(n)ᵀ` accumulated from the nonzeros: records are grouped by
    /// mode-`n` fiber, and each fiber contributes the outer product of its
    /// sparse entries.
    pub fn mode_gram(&self, mode: usize) -> Result<Matrix> {
        if mode >= self.order() {
            return Err(Error::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        let n = self.order();
        let mut gram = Matrix::zeros(self.dims[mode], self.dims[mode]);

        // Fiber id: mixed-radix over the non-`mode` indices.
        let fiber_of = |r: usize| -> u64 {
            let idx = self.record_indices(r);
            let mut id = 0u64;
            for m in (0..n).rev() {
                if m == mode {
                    continue;
                }
                id = id * self.dims[m] as u64 + idx[m] as u64;
            }
            id
        };

        let mut perm =
            TrackedBuf::from_vec(MemClass::Coo, (0..self.nnz() as u32).collect::<Vec<u32>>());
        perm.sort_unstable_by_key(|&r| fiber_of(r as usize));

        let mut start = 0usize;
        while start < perm.len() {
            let fid = fiber_of(perm[start] as usize);
            let mut end = start + 1;
            while end < perm.len() && fiber_of(perm[end] as usize) == fid {
                end += 1;
            }
            for a in start..end {
                let ra = perm[a] as usize;
                let ia = self.record_indices(ra)[mode] as usize;
                let va = self.values[ra];
                for b in start..end {
                    let rb = perm[b] as usize;
                    let ib = self.record_indices(rb)[mode] as usize;
                    gram.add_at(ia, ib, va * self.values[rb]);
                }
            }
            start = end;
        }
        Ok(gram)
    }

    /// `⟦x; F0ᵀ, …⟧` with identity in the `None` modes, accumulated record
    /// by record. The result is dense but only as large as the projected
    /// dimensions.
    pub fn project_transposed(&self, factors: &[Option<&Matrix>]) -> Result<DenseTensor> {
        let n = self.order();
        if factors.len() != n {
            return Err(Error::Shape(format!(
                "{} factors supplied for an order-{} tensor",
                factors.len(),
                n
            )));
        }
        let mut out_dims = Vec::with_capacity(n);
        for (m, f) in factors.iter().enumerate() {
            match f {
                Some(f) => {
                    if f.rows() != self.dims[m] {
                        return Err(Error::Shape(format!(
                            "factor {} has {} rows, mode size is {}",
                            m,
                            f.rows(),
                            self.dims[m]
                        )));
                    }
                    out_dims.push(f.cols());
                }
                None => out_dims.push(self.dims[m]),
            }
        }
        let mut out = DenseTensor::zeros(out_dims)?;

        // Transposed copies make each record's factor row contiguous.
        let transposed: Vec<Option<Matrix>> =
            factors.iter().map(|f| f.map(|f| f.transpose())).collect();

        let mut strides = [0usize; MAX_ORDER];
        {
            let mut acc = 1;
            for m in 0..n {
                strides[m] = acc;
                acc *= out.dims()[m];
            }
        }

        let expansion: usize = (0..n)
            .filter_map(|m| factors[m].map(|f| f.cols()))
            .product();
        let mut weights: Vec<f64> = Vec::with_capacity(expansion);
        let mut offsets: Vec<usize> = Vec::with_capacity(expansion);
        let mut next_weights: Vec<f64> = Vec::with_capacity(expansion);
        let mut next_offsets: Vec<usize> = Vec::with_capacity(expansion);

        for r in 0..self.nnz() {
            let idx = self.record_indices(r);
            let mut base = 0usize;
            weights.clear();
            offsets.clear();
            weights.push(self.values[r]);
            offsets.push(0);
            for m in 0..n {
                match &transposed[m] {
                    None => base += idx[m] as usize * strides[m],
                    Some(ft) => {
                        // Column idx[m] of the transposed factor is row
                        // idx[m] of the factor.
                        let row = ft.col(idx[m] as usize);
                        next_weights.clear();
                        next_offsets.clear();
                        for (j, &w) in row.iter().enumerate() {
                            let off_j = j * strides[m];
                            for (t, &wt) in weights.iter().enumerate() {
                                next_weights.push(wt * w);
                                next_offsets.push(offsets[t] + off_j);
                            }
                        }
                        std::mem::swap(&mut weights, &mut next_weights);
                        std::mem::swap(&mut offsets, &mut next_offsets);
                    }
                }
            }
            let data = out.values_mut();
            for (t, &w) in weights.iter().enumerate() {
                data[base + offsets[t]] += w;
            }
        }
        Ok(out)
    }

    /// Inner product `⟨x, ⟦core; F0, …⟧⟩` accumulated over the nonzeros.
    pub fn dot_reconstruction(&self, core: &DenseTensor, factors: &[Matrix]) -> Result<f64> {
        let n = self.order();
        if factors.len() != n || core.order() != n {
            return Err(Error::Shape("model order mismatch".into()));
        }
        for (m, f) in factors.iter().enumerate() {
            if f.rows() != self.dims[m] || f.cols() != core.dims()[m] {
                return Err(Error::Shape(format!(
                    "factor {} is {}x{}, expected {}x{}",
                    m,
                    f.rows(),
                    f.cols(),
                    self.dims[m],
                    core.dims()[m]
                )));
            }
        }
        let transposed: Vec<Matrix> = factors.iter().map(|f| f.transpose()).collect();
        let mut acc = 0.0f64;
        let core_dims = core.dims();
        let mut weights: Vec<f64> = Vec::new();
        let mut offsets: Vec<usize> = Vec::new();
        let mut next_weights: Vec<f64> = Vec::new();
        let mut next_offsets: Vec<usize> = Vec::new();
        let mut strides = [0usize; MAX_ORDER];
        {
            let mut s = 1;
            for m in 0..n {
                strides[m] = s;
                s *= core_dims[m];
            }
        }
        for r in 0..self.nnz() {
            let idx = self.record_indices(r);
            weights.clear();
            offsets.clear();
            weights.push(1.0);
            offsets.push(0);
            for m in 0..n {
                let row = transposed[m].col(idx[m] as usize);
                next_weights.clear();
                next_offsets.clear();
                for (j, &w) in row.iter().enumerate() {
                    let off_j = j * strides[m];
                    for (t, &wt) in weights.iter().enumerate() {
                        next_weights.push(wt * w);
                        next_offsets.push(offsets[t] + off_j);
                    }
                }
                std::mem::swap(&mut weights, &mut next_weights);
                std::mem::swap(&mut offsets, &mut next_offsets);
            }
            let mut xhat = 0.0;
            let g = core.values();
            for (t, &w) in weights.iter().enumerate() {
                xhat += g[offsets[t]] * w;
            }
            acc += self.values[r] * xhat;
        }
        Ok(acc)
    }

    /// Densifies; test and small-scale use only.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let mut out = DenseTensor::zeros(self.dims.clone())?;
        let n = self.order();
        for r in 0..self.nnz() {
            let idx = self.record_indices(r);
            let mut full = [0usize; MAX_ORDER];
            for m in 0..n {
                full[m] = idx[m] as usize;
            }
            let off = out.offset(&full[..n]);
            out.values_mut()[off] = self.values[r];
        }
        Ok(out)
    }
}
