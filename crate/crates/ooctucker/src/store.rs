//! On-disk slice stores: the out-of-core backbone.
//!
//! A third-order tensor is cut into matrix slices by fixing one mode; a
//! fourth-order tensor by fixing an ordered pair of modes. Building a store
//! externally sorts the coordinate file on the fixed mode(s) so each slice
//! arrives contiguously, then serializes every slice (sparse, compressed
//! row format) into slab files holding `slab_size` consecutive slices.
//! Peak memory while building is the sort buffer plus the largest single
//! slice.
//!
//! # Slab format
//!
//! A slab file is a sequence of `TSLC` blocks, one per slice, each
//! self-contained and seekable (the manifest records byte offsets):
//!
//! ```text
//! magic   "TSLC"          4 bytes
//! version u32 LE          currently 1
//! rows    u64 LE
//! cols    u64 LE
//! nnz     u64 LE
//! offsets (rows+1) u64 LE row start positions into the index/value arrays
//! cols    nnz u64 LE      column indices, strictly increasing per row
//! values  nnz f64 LE
//! crc32   u32 LE          IEEE CRC-32 of all preceding bytes in the block
//! ```
//!
//! Alongside the slabs, `manifest.json` records dimensions, axes, per-slice
//! offsets and nonzero counts, the total squared norm, and the content key
//! of the source file so cached stores can be reused safely.

use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coo::{parse_line, CooFile};
use crate::error::{Error, Result};
use crate::extsort::external_sort_by_cols;
use crate::matrix::Matrix;
use crate::mem::{MemClass, TrackedBuf};
use crate::util::crc32;

pub const TSLC_MAGIC: &[u8; 4] = b"TSLC";
pub const TSLC_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

/// Which mode(s) a store fixes. Third-order stores fix one mode, fourth-order
/// stores fix an ordered pair (lower mode first); slices of a pair store are
/// enumerated row-major in the pair's indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SliceAxes {
    /// Fix one mode (0-based).
    Mode(usize),
    /// Fix two modes (0-based, `a < b`).
    Pair(usize, usize),
}

impl SliceAxes {
    pub fn fixed_modes(&self) -> Vec<usize> {
        match *self {
            SliceAxes::Mode(m) => vec![m],
            SliceAxes::Pair(a, b) => vec![a, b],
        }
    }

    /// The two remaining modes `(rows, cols)` of every slice.
    pub fn remaining(&self, order: usize) -> (usize, usize) {
        let fixed = self.fixed_modes();
        let free: Vec<usize> = (0..order).filter(|m| !fixed.contains(m)).collect();
        (free[0], free[1])
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        let fixed = self.fixed_modes();
        if fixed.len() + 2 != order {
            return Err(Error::InvalidArgument(format!(
                "{} fixed modes leave no matrix slices in an order-{} tensor",
                fixed.len(),
                order
            )));
        }
        for &m in &fixed {
            if m >= order {
                return Err(Error::InvalidMode { mode: m, order });
            }
        }
        if let SliceAxes::Pair(a, b) = *self {
            if a >= b {
                return Err(Error::InvalidArgument(
                    "pair axes must be given lower mode first".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn num_slices(&self, dims: &[usize]) -> usize {
        self.fixed_modes().iter().map(|&m| dims[m]).product()
    }

    /// Human-readable label, 1-based, used in directory names and errors.
    pub fn label(&self) -> String {
        match *self {
            SliceAxes::Mode(m) => format!("mode{}", m + 1),
            SliceAxes::Pair(a, b) => format!("modes{}{}", a + 1, b + 1),
        }
    }
}

/// Sparse matrix slice, compressed row storage. No explicit zeros; column
/// indices strictly increase within a row.
#[derive(Debug)]
pub struct SliceMatrix {
    rows: usize,
    cols: usize,
    row_offsets: TrackedBuf<u64>,
    col_indices: TrackedBuf<u32>,
    values: TrackedBuf<f64>,
}

impl SliceMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: TrackedBuf::zeroed(MemClass::Slice, rows + 1),
            col_indices: TrackedBuf::new(MemClass::Slice),
            values: TrackedBuf::new(MemClass::Slice),
        }
    }

    /// Builds from unordered triplets. Zero values are dropped; duplicate
    /// positions are an error.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(u32, u32, f64)>,
    ) -> Result<Self> {
        entries.retain(|&(_, _, v)| v != 0.0);
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for e in &entries {
            if e.0 as usize >= rows || e.1 as usize >= cols {
                return Err(Error::Shape(format!(
                    "entry ({}, {}) outside a {}x{} slice",
                    e.0, e.1, rows, cols
                )));
            }
        }
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::Shape(format!(
                    "duplicate slice entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_offsets = TrackedBuf::with_capacity(MemClass::Slice, rows + 1);
        let mut col_indices = TrackedBuf::with_capacity(MemClass::Slice, entries.len());
        let mut values = TrackedBuf::with_capacity(MemClass::Slice, entries.len());
        let mut next = 0usize;
        row_offsets.push(0);
        for r in 0..rows {
            while next < entries.len() && entries[next].0 as usize == r {
                col_indices.push(entries[next].1);
                values.push(entries[next].2);
                next += 1;
            }
            row_offsets.push(col_indices.len() as u64);
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    #[inline]
    fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        self.row_offsets[r] as usize..self.row_offsets[r + 1] as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            self.row_range(r)
                .map(move |k| (r, self.col_indices[k] as usize, self.values[k]))
        })
    }

    /// `self * f` into a dense matrix.
    pub fn mul_dense(&self, f: &Matrix) -> Result<Matrix> {
        if f.rows() != self.cols {
            return Err(Error::Shape(format!(
                "slice has {} columns, factor has {} rows",
                self.cols,
                f.rows()
            )));
        }
        let mut out = Matrix::zeros(self.rows, f.cols());
        for j in 0..f.cols() {
            let fcol = f.col(j);
            let ocol = out.col_mut(j);
            for r in 0..self.rows {
                let mut acc = 0.0;
                for k in self.row_offsets[r] as usize..self.row_offsets[r + 1] as usize {
                    acc += self.values[k] * fcol[self.col_indices[k] as usize];
                }
                ocol[r] = acc;
            }
        }
        Ok(out)
    }

    /// `selfᵀ * f` into a dense matrix.
    pub fn tr_mul_dense(&self, f: &Matrix) -> Result<Matrix> {
        if f.rows() != self.rows {
            return Err(Error::Shape(format!(
                "slice has {} rows, factor has {} rows",
                self.rows,
                f.rows()
            )));
        }
        let mut out = Matrix::zeros(self.cols, f.cols());
        for j in 0..f.cols() {
            let fcol = f.col(j);
            let ocol = out.col_mut(j);
            for r in 0..self.rows {
                let w = fcol[r];
                if w == 0.0 {
                    continue;
                }
                for k in self.row_range(r) {
                    ocol[self.col_indices[k] as usize] += self.values[k] * w;
                }
            }
        }
        Ok(out)
    }

    /// `m += self * selfᵀ`.
    pub fn add_gram_rows(&self, m: &mut Matrix) -> Result<()> {
        if m.rows() != self.rows || m.cols() != self.rows {
            return Err(Error::Shape("gram target shape mismatch".into()));
        }
        for r1 in 0..self.rows {
            let a = self.row_range(r1);
            if a.is_empty() {
                continue;
            }
            for r2 in r1..self.rows {
                let b = self.row_range(r2);
                if b.is_empty() {
                    continue;
                }
                // Merge the two sorted rows.
                let mut i = a.start;
                let mut j = b.start;
                let mut dot = 0.0;
                while i < a.end && j < b.end {
                    let ci = self.col_indices[i];
                    let cj = self.col_indices[j];
                    match ci.cmp(&cj) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            dot += self.values[i] * self.values[j];
                            i += 1;
                            j += 1;
                        }
                    }
                }
                if dot != 0.0 {
                    m.add_at(r1, r2, dot);
                    if r1 != r2 {
                        m.add_at(r2, r1, dot);
                    }
                }
            }
        }
        Ok(())
    }

    /// `m += selfᵀ * self`.
    pub fn add_gram_cols(&self, m: &mut Matrix) -> Result<()> {
        if m.rows() != self.cols || m.cols() != self.cols {
            return Err(Error::Shape("gram target shape mismatch".into()));
        }
        for r in 0..self.rows {
            let range = self.row_range(r);
            for i in range.clone() {
                let ci = self.col_indices[i] as usize;
                let vi = self.values[i];
                for j in range.clone() {
                    m.add_at(ci, self.col_indices[j] as usize, vi * self.values[j]);
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            out.set(r, c, v);
        }
        out
    }

    /// Streams one `TSLC` block into a writer; returns the byte count.
    pub fn write_block(&self, w: &mut impl Write) -> std::io::Result<u64> {
        use crate::util::ChecksumWriter;
        let mut cw = ChecksumWriter::new(w);
        cw.write_all(TSLC_MAGIC)?;
        cw.write_u32(TSLC_VERSION)?;
        cw.write_u64(self.rows as u64)?;
        cw.write_u64(self.cols as u64)?;
        cw.write_u64(self.nnz() as u64)?;
        for &o in self.row_offsets.iter() {
            cw.write_u64(o)?;
        }
        for &c in self.col_indices.iter() {
            cw.write_u64(c as u64)?;
        }
        for &v in self.values.iter() {
            cw.write_f64(v)?;
        }
        cw.finish()?;
        Ok(36 + 8 * (self.rows as u64 + 1) + 16 * self.nnz() as u64)
    }

    /// Serializes to one `TSLC` block.
    pub fn to_block(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(36 + 8 * (self.rows + 1) + 16 * self.nnz());
        buf.extend_from_slice(TSLC_MAGIC);
        buf.extend_from_slice(&TSLC_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.rows as u64).to_le_bytes());
        buf.extend_from_slice(&(self.cols as u64).to_le_bytes());
        buf.extend_from_slice(&(self.nnz() as u64).to_le_bytes());
        for &o in self.row_offsets.iter() {
            buf.extend_from_slice(&o.to_le_bytes());
        }
        for &c in self.col_indices.iter() {
            buf.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for &v in self.values.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    /// Reads one `TSLC` block from a stream without buffering it whole;
    /// the checksum is verified before the result is returned.
    pub fn read_from(r: &mut impl std::io::Read, origin: &Path) -> Result<Self> {
        use crate::util::ChecksumReader;
        let corrupt = |msg: &str| Error::Corrupt {
            path: origin.to_path_buf(),
            msg: msg.into(),
        };
        let io = |e: std::io::Error| Error::io(origin, e);

        let mut r = ChecksumReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != TSLC_MAGIC {
            return Err(corrupt("bad magic, not a TSLC block"));
        }
        let version = r.read_u32().map_err(io)?;
        if version != TSLC_VERSION {
            return Err(corrupt(&format!("unsupported TSLC version {}", version)));
        }
        let rows = r.read_u64().map_err(io)? as usize;
        let cols = r.read_u64().map_err(io)? as usize;
        let nnz = r.read_u64().map_err(io)? as usize;
        let mut row_offsets = TrackedBuf::with_capacity(MemClass::Slice, rows + 1);
        for _ in 0..=rows {
            row_offsets.push(r.read_u64().map_err(io)?);
        }
        let mut col_indices = TrackedBuf::with_capacity(MemClass::Slice, nnz);
        for _ in 0..nnz {
            col_indices.push(r.read_u64().map_err(io)? as u32);
        }
        let mut values = TrackedBuf::with_capacity(MemClass::Slice, nnz);
        for _ in 0..nnz {
            values.push(r.read_f64().map_err(io)?);
        }
        if !r.verify().map_err(io)? {
            return Err(corrupt("checksum mismatch"));
        }
        if row_offsets[0] != 0 || row_offsets[rows] as usize != nnz {
            return Err(corrupt("inconsistent row offsets"));
        }
        for w in row_offsets.windows(2) {
            if w[1] < w[0] {
                return Err(corrupt("row offsets decrease"));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Parses one `TSLC` block held in memory, verifying magic, version and
    /// checksum. Inverse of [`to_block`](Self::to_block).
    pub fn from_block(bytes: &[u8], origin: &Path) -> Result<Self> {
        let corrupt = |msg: &str| Error::Corrupt {
            path: origin.to_path_buf(),
            msg: msg.into(),
        };
        if bytes.len() < 36 {
            return Err(corrupt("block shorter than the TSLC header"));
        }
        if &bytes[0..4] != TSLC_MAGIC {
            return Err(corrupt("bad magic, not a TSLC block"));
        }
        let crc_stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32(&bytes[..bytes.len() - 4]) != crc_stored {
            return Err(corrupt("checksum mismatch"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != TSLC_VERSION {
            return Err(corrupt(&format!("unsupported TSLC version {}", version)));
        }
        let u64_at = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let rows = u64_at(8) as usize;
        let cols = u64_at(16) as usize;
        let nnz = u64_at(24) as usize;
        let expect = 36 + 8 * (rows + 1) + 16 * nnz;
        if bytes.len() != expect {
            return Err(corrupt("block length does not match header"));
        }
        let mut off = 32;
        let mut row_offsets = TrackedBuf::with_capacity(MemClass::Slice, rows + 1);
        for _ in 0..=rows {
            row_offsets.push(u64_at(off));
            off += 8;
        }
        let mut col_indices = TrackedBuf::with_capacity(MemClass::Slice, nnz);
        for _ in 0..nnz {
            col_indices.push(u64_at(off) as u32);
            off += 8;
        }
        let mut values = TrackedBuf::with_capacity(MemClass::Slice, nnz);
        for _ in 0..nnz {
            values.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        if row_offsets[0] != 0 || row_offsets[rows] as usize != nnz {
            return Err(corrupt("inconsistent row offsets"));
        }
        for w in row_offsets.windows(2) {
            if w[1] < w[0] {
                return Err(corrupt("row offsets decrease"));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceMeta {
    pub slab: u32,
    pub offset: u64,
    pub len: u64,
    pub nnz: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreManifest {
    pub version: u32,
    pub content_key: String,
    pub dims: Vec<usize>,
    pub axes: SliceAxes,
    pub slab_size: usize,
    pub nnz: u64,
    pub sq_norm: f64,
    pub slice_rows: usize,
    pub slice_cols: usize,
    pub slabs: Vec<String>,
    pub slices: Vec<SliceMeta>,
}

/// Options for [`build_slice_store`].
#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Consecutive slices per slab file; `None` targets roughly 64 MiB per
    /// slab.
    pub slab_size: Option<usize>,
    /// External sort buffer in bytes.
    pub buffer_bytes: usize,
    /// Keep the sorted intermediate text file alongside the slabs.
    pub keep_sorted: bool,
    /// Stamped into the manifest so callers can detect stale caches.
    pub content_key: String,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            slab_size: None,
            buffer_bytes: crate::extsort::DEFAULT_BUFFER_BYTES,
            keep_sorted: false,
            content_key: String::new(),
        }
    }
}

/// An immutable on-disk slice store; cheap to open, safe to read from many
/// threads (every load opens its own handle).
#[derive(Debug, Clone)]
pub struct SliceStore {
    root: PathBuf,
    manifest: StoreManifest,
}

const TARGET_SLAB_BYTES: u64 = 64 << 20;

/// Cuts a coordinate file into slices along `axes` and serializes them under
/// `root`. The input is externally sorted first (stable, keyed on the fixed
/// modes) so the cut is a single streaming pass; memory stays bounded by the
/// sort buffer plus the largest slice.
pub fn build_slice_store(
    coo: &CooFile,
    axes: SliceAxes,
    root: &Path,
    opts: &BuildOptions,
) -> Result<SliceStore> {
    let order = coo.dims.len();
    axes.validate(order)?;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let sorted_path = root.join("sorted.txt");
    let fixed = axes.fixed_modes();
    external_sort_by_cols(&coo.path, &sorted_path, &fixed, opts.buffer_bytes, root)?;

    let (r_mode, c_mode) = axes.remaining(order);
    let slice_rows = coo.dims[r_mode];
    let slice_cols = coo.dims[c_mode];
    let num_slices = axes.num_slices(&coo.dims);

    let slab_size = opts.slab_size.unwrap_or_else(|| {
        let avg_nnz = coo.nnz / num_slices.max(1) as u64;
        let avg_bytes = 40 + 8 * (slice_rows as u64 + 1) + 16 * avg_nnz;
        (TARGET_SLAB_BYTES / avg_bytes.max(1)).clamp(1, num_slices.max(1) as u64) as usize
    });
    if slab_size == 0 {
        return Err(Error::InvalidArgument(
            "slab size must be at least 1".into(),
        ));
    }

    // Row-major position of a record among the slices.
    let seq_of = |rec: &[u64]| -> u64 {
        let mut seq = 0u64;
        for &m in &fixed {
            seq = seq * coo.dims[m] as u64 + (rec[m] - 1);
        }
        seq
    };

    let file = std::fs::File::open(&sorted_path).map_err(|e| Error::io(&sorted_path, e))?;
    let mut reader = BufReader::new(file);

    let mut slabs: Vec<String> = Vec::new();
    let mut slices: Vec<SliceMeta> = Vec::with_capacity(num_slices);
    let mut writer: Option<std::io::BufWriter<std::fs::File>> = None;
    let mut slab_offset = 0u64;
    let mut total_nnz = 0u64;
    let mut sq_norm = 0.0f64;

    // Pulls the next record from the sorted file as (slice position, entry);
    // zero-valued records come back with no entry.
    type Staged = (u64, Option<(u32, u32, f64)>);
    let mut line_no = 0u64;
    let mut line = String::new();
    let mut read_next = |reader: &mut BufReader<std::fs::File>| -> Result<Option<Staged>> {
        loop {
            line.clear();
            let n = reader
                .read_line(&mut line)
                .map_err(|e| Error::io(&sorted_path, e))?;
            if n == 0 {
                return Ok(None);
            }
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec = parse_line(&sorted_path, line_no, &line, &coo.dims)?;
            let mut as64 = [0u64; 4];
            for m in 0..order {
                as64[m] = rec.indices[m] as u64;
            }
            let seq = seq_of(&as64[..order]);
            let entry = (rec.value != 0.0)
                .then(|| (rec.indices[r_mode] - 1, rec.indices[c_mode] - 1, rec.value));
            return Ok(Some((seq, entry)));
        }
    };

    let mut carried: Option<Staged> = None;
    for seq in 0..num_slices as u64 {
        let mut entries: TrackedBuf<(u32, u32, f64)> = TrackedBuf::new(MemClass::Slice);
        loop {
            let item = match carried.take() {
                Some(c) => c,
                None => match read_next(&mut reader)? {
                    Some(x) => x,
                    None => break,
                },
            };
            if item.0 < seq {
                return Err(Error::Corrupt {
                    path: sorted_path.clone(),
                    msg: "records are not sorted by the fixed modes".into(),
                });
            }
            if item.0 > seq {
                carried = Some(item);
                break;
            }
            if let Some(e) = item.1 {
                entries.push(e);
            }
        }

        let slice = SliceMatrix::from_triplets(slice_rows, slice_cols, entries.into_vec())?;
        total_nnz += slice.nnz() as u64;
        sq_norm += slice.sq_norm();

        if slices.len().is_multiple_of(slab_size) {
            if let Some(mut w) = writer.take() {
                w.flush().map_err(|e| Error::io(root, e))?;
            }
            let name = format!("slab-{:05}.tslc", slabs.len());
            let path = root.join(&name);
            writer = Some(std::io::BufWriter::new(
                std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?,
            ));
            slabs.push(name);
            slab_offset = 0;
        }
        let w = writer.as_mut().expect("slab writer");
        let len = slice.write_block(w).map_err(|e| Error::io(root, e))?;
        slices.push(SliceMeta {
            slab: (slabs.len() - 1) as u32,
            offset: slab_offset,
            len,
            nnz: slice.nnz() as u64,
        });
        slab_offset += len;
    }

    if let Some(mut w) = writer.take() {
        w.flush().map_err(|e| Error::io(root, e))?;
    }

    if total_nnz != coo.nnz {
        return Err(Error::Corrupt {
            path: coo.path.clone(),
            msg: format!(
                "store holds {} nonzeros but the source declared {}",
                total_nnz, coo.nnz
            ),
        });
    }

    if !opts.keep_sorted {
        let _ = std::fs::remove_file(&sorted_path);
    }

    let manifest = StoreManifest {
        version: MANIFEST_VERSION,
        content_key: opts.content_key.clone(),
        dims: coo.dims.clone(),
        axes,
        slab_size,
        nnz: total_nnz,
        sq_norm,
        slice_rows,
        slice_cols,
        slabs,
        slices,
    };
    let manifest_path = root.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Corrupt {
        path: manifest_path.clone(),
        msg: e.to_string(),
    })?;
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(SliceStore {
        root: root.to_path_buf(),
        manifest,
    })
}

impl SliceStore {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest_path = root.join(MANIFEST_NAME);
        let json =
            std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: StoreManifest = serde_json::from_str(&json).map_err(|e| Error::Corrupt {
            path: manifest_path.clone(),
            msg: e.to_string(),
        })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Corrupt {
                path: manifest_path,
                msg: format!("unsupported manifest version {}", manifest.version),
            });
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn axes(&self) -> SliceAxes {
        self.manifest.axes
    }

    pub fn dims(&self) -> &[usize] {
        &self.manifest.dims
    }

    pub fn num_slices(&self) -> usize {
        self.manifest.slices.len()
    }

    pub fn nnz(&self) -> u64 {
        self.manifest.nnz
    }

    pub fn sq_norm(&self) -> f64 {
        self.manifest.sq_norm
    }

    pub fn slice_nnz(&self, seq: usize) -> u64 {
        self.manifest.slices[seq].nnz
    }

    /// True if some index of the fixed mode(s) has no nonzeros at all.
    pub fn has_empty_slice(&self) -> bool {
        self.manifest.slices.iter().any(|s| s.nnz == 0)
    }

    /// Row-major slice position of a pair store index.
    pub fn seq_of_pair(&self, i: usize, j: usize) -> usize {
        match self.manifest.axes {
            SliceAxes::Pair(_, b) => i * self.manifest.dims[b] + j,
            SliceAxes::Mode(_) => i,
        }
    }

    /// Loads slice `seq` (0-based). Verifies the block checksum.
    pub fn load_slice(&self, seq: usize) -> Result<SliceMatrix> {
        let meta = self.manifest.slices.get(seq).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "slice {} out of range ({} slices)",
                seq,
                self.manifest.slices.len()
            ))
        })?;
        let path = self.root.join(&self.manifest.slabs[meta.slab as usize]);
        let mut file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        file.seek(SeekFrom::Start(meta.offset))
            .map_err(|e| Error::io(&path, e))?;
        let mut reader = BufReader::new(file);
        let slice = SliceMatrix::read_from(&mut reader, &path)?;
        if slice.rows() != self.manifest.slice_rows || slice.cols() != self.manifest.slice_cols {
            return Err(Error::Corrupt {
                path,
                msg: "slice shape disagrees with the manifest".into(),
            });
        }
        Ok(slice)
    }
}
