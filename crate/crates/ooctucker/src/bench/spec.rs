//! Bench suite spec files: line-oriented `key = value` text.
//!
//! ```text
//! # comment
//! group = size-sweep            # starts a group; later keys apply to it
//! algos = hosvd hooi sp mp
//! seeds = 1..5                  # or an explicit list: 1 2 3
//! density = 0.1
//! tol = 1e-4                    # fit and core-growth threshold
//! max-iters = 50
//! sort-buffer = 16MiB           # bytes, KiB/MiB/GiB suffixes accepted
//! slab-size = 64                # slices per slab; omit for automatic
//! case = 40x40x40 : 4x4x4       # tensor dims : core dims (repeatable)
//! ```
//!
//! A group runs `algos x cases x seeds` decompositions. Keys keep their
//! value until overridden inside the same group.

use std::path::Path;

use crate::bench::AlgoId;
use crate::decomp::ConvergenceConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BenchGroup {
    pub name: String,
    pub algos: Vec<AlgoId>,
    pub seeds: Vec<u64>,
    pub density: f64,
    pub cfg: ConvergenceConfig,
    pub sort_buffer: usize,
    pub slab_size: Option<usize>,
    /// `(dims, core_dims)` pairs.
    pub cases: Vec<(Vec<usize>, Vec<usize>)>,
}

impl BenchGroup {
    fn new(name: String) -> Self {
        Self {
            name,
            algos: AlgoId::ALL.to_vec(),
            seeds: vec![0],
            density: 0.1,
            cfg: ConvergenceConfig::default(),
            sort_buffer: crate::extsort::DEFAULT_BUFFER_BYTES,
            slab_size: None,
            cases: Vec::new(),
        }
    }
}

/// Parses `40x40x40` (or comma-separated) into dimensions.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).map(str::trim).collect();
    let dims: std::result::Result<Vec<usize>, _> = parts.iter().map(|p| p.parse()).collect();
    match dims {
        Ok(d) if (2..=4).contains(&d.len()) && d.iter().all(|&v| v > 0) => Ok(d),
        _ => Err(Error::InvalidArgument(format!(
            "cannot parse dimensions from {:?} (expected e.g. 40x40x40)",
            s
        ))),
    }
}

/// Parses a byte count with optional `KiB`/`MiB`/`GiB` suffix.
pub fn parse_bytes(s: &str) -> Result<usize> {
    let s = s.trim();
    let (num, mult) = if let Some(p) = s.strip_suffix("GiB") {
        (p, 1usize << 30)
    } else if let Some(p) = s.strip_suffix("MiB") {
        (p, 1 << 20)
    } else if let Some(p) = s.strip_suffix("KiB") {
        (p, 1 << 10)
    } else {
        (s, 1)
    };
    num.trim()
        .parse::<usize>()
        .map(|v| v * mult)
        .map_err(|_| Error::InvalidArgument(format!("cannot parse byte count from {:?}", s)))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| bad_seeds(s))?;
        let hi: u64 = b.trim().parse().map_err(|_| bad_seeds(s))?;
        if hi < lo {
            return Err(bad_seeds(s));
        }
        return Ok((lo..=hi).collect());
    }
    let seeds: std::result::Result<Vec<u64>, _> = s.split_whitespace().map(|t| t.parse()).collect();
    match seeds {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(bad_seeds(s)),
    }
}

fn bad_seeds(s: &str) -> Error {
    Error::InvalidArgument(format!(
        "cannot parse seeds from {:?} (expected a list or lo..hi)",
        s
    ))
}

pub fn parse_spec(path: &Path) -> Result<Vec<BenchGroup>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut groups: Vec<BenchGroup> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::BenchSpec(format!(
                "{}:{}: expected key = value",
                path.display(),
                line_no
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        let ctx = |e: Error| Error::BenchSpec(format!("{}:{}: {}", path.display(), line_no, e));

        if key == "group" {
            groups.push(BenchGroup::new(value.to_string()));
            continue;
        }
        let group = groups.last_mut().ok_or_else(|| {
            Error::BenchSpec(format!(
                "{}:{}: {:?} before any `group =` line",
                path.display(),
                line_no,
                key
            ))
        })?;
        match key {
            "algos" => {
                let algos: Result<Vec<AlgoId>> =
                    value.split_whitespace().map(AlgoId::parse).collect();
                group.algos = algos.map_err(ctx)?;
            }
            "seeds" => group.seeds = parse_seeds(value).map_err(ctx)?,
            "density" => {
                group.density = value
                    .parse()
                    .map_err(|_| ctx(Error::InvalidArgument(format!("bad density {:?}", value))))?;
            }
            "tol" => {
                let tol: f64 = value.parse().map_err(|_| {
                    ctx(Error::InvalidArgument(format!("bad tolerance {:?}", value)))
                })?;
                group.cfg.fit_threshold = tol;
                group.cfg.core_growth_threshold = tol;
            }
            "max-iters" => {
                group.cfg.max_iterations = value.parse().map_err(|_| {
                    ctx(Error::InvalidArgument(format!("bad max-iters {:?}", value)))
                })?;
            }
            "sort-buffer" => group.sort_buffer = parse_bytes(value).map_err(ctx)?,
            "slab-size" => {
                group.slab_size = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| {
                        ctx(Error::InvalidArgument(format!("bad slab-size {:?}", value)))
                    })?)
                };
            }
            "case" => {
                let (d, c) = value.split_once(':').ok_or_else(|| {
                    ctx(Error::InvalidArgument(
                        "case needs the form `dims : core`".into(),
                    ))
                })?;
                let dims = parse_dims(d).map_err(ctx)?;
                let core = parse_dims(c).map_err(ctx)?;
                if core.len() != dims.len() {
                    return Err(ctx(Error::InvalidArgument(
                        "core order differs from tensor order".into(),
                    )));
                }
                group.cases.push((dims, core));
            }
            other => {
                return Err(Error::BenchSpec(format!(
                    "{}:{}: unknown key {:?}",
                    path.display(),
                    line_no,
                    other
                )))
            }
        }
    }

    if groups.is_empty() {
        return Err(Error::BenchSpec(format!(
            "{}: no groups defined",
            path.display()
        )));
    }
    for g in &groups {
        if g.cases.is_empty() {
            return Err(Error::BenchSpec(format!(
                "{}: group {:?} has no cases",
                path.display(),
                g.name
            )));
        }
    }
    Ok(groups)
}
