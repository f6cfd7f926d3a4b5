//! Binary container for decompositions.
//!
//! ```text
//! magic      "TKRD"              4 bytes
//! version    u32 LE              currently 1
//! order      u32 LE              2, 3 or 4
//! dims       order x u64 LE      tensor dimensions I_n
//! core dims  order x u64 LE      core dimensions J_n
//! core       prod(J) x f64 LE    mode-0-fastest linearization
//! factors    per mode: I_n*J_n x f64 LE, column-major (rows fastest)
//! crc32      u32 LE              IEEE CRC-32 of all preceding bytes
//! ```
//!
//! Loading re-validates factor orthonormality, so a container always yields
//! a well-formed [`TuckerModel`].

use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TuckerModel;
use crate::tensor::DenseTensor;
use crate::util::{ChecksumReader, ChecksumWriter};

pub const TKRD_MAGIC: &[u8; 4] = b"TKRD";
pub const TKRD_VERSION: u32 = 1;

pub fn save_model(path: &Path, model: &TuckerModel) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufWriter::new(file);
    let mut w = ChecksumWriter::new(&mut buf);
    let io = |e: std::io::Error| Error::io(path, e);

    w.write_all(TKRD_MAGIC).map_err(io)?;
    w.write_u32(TKRD_VERSION).map_err(io)?;
    let order = model.order();
    w.write_u32(order as u32).map_err(io)?;
    for &d in &model.dims() {
        w.write_u64(d as u64).map_err(io)?;
    }
    for &d in model.core_dims() {
        w.write_u64(d as u64).map_err(io)?;
    }
    for &v in model.core().values() {
        w.write_f64(v).map_err(io)?;
    }
    for f in model.factors() {
        for &v in f.values() {
            w.write_f64(v).map_err(io)?;
        }
    }
    w.finish().map_err(io)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TuckerModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufReader::new(file);
    let mut r = ChecksumReader::new(&mut buf);
    let io = |e: std::io::Error| Error::io(path, e);
    let corrupt = |msg: &str| Error::Corrupt {
        path: path.to_path_buf(),
        msg: msg.into(),
    };

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != TKRD_MAGIC {
        return Err(corrupt("bad magic, not a TKRD container"));
    }
    let version = r.read_u32().map_err(io)?;
    if version != TKRD_VERSION {
        return Err(corrupt(&format!("unsupported version {}", version)));
    }
    let order = r.read_u32().map_err(io)? as usize;
    if !(2..=4).contains(&order) {
        return Err(corrupt(&format!("unsupported order {}", order)));
    }
    let mut dims = Vec::with_capacity(order);
    for _ in 0..order {
        dims.push(r.read_u64().map_err(io)? as usize);
    }
    let mut core_dims = Vec::with_capacity(order);
    for _ in 0..order {
        core_dims.push(r.read_u64().map_err(io)? as usize);
    }
    if core_dims
        .iter()
        .zip(dims.iter())
        .any(|(&j, &i)| j > i || j == 0)
    {
        return Err(corrupt(
            "core dimensions inconsistent with tensor dimensions",
        ));
    }
    let core_len: usize = core_dims.iter().product();
    let mut core_values = Vec::with_capacity(core_len);
    for _ in 0..core_len {
        core_values.push(r.read_f64().map_err(io)?);
    }
    let mut factors = Vec::with_capacity(order);
    for n in 0..order {
        let len = dims[n] * core_dims[n];
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(r.read_f64().map_err(io)?);
        }
        factors.push(Matrix::from_col_major(dims[n], core_dims[n], values)?);
    }
    if !r.verify().map_err(io)? {
        return Err(corrupt("checksum mismatch"));
    }

    let core = DenseTensor::from_vec(core_dims, core_values)?;
    TuckerModel::new(core, factors)
}
