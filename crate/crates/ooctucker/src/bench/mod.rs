//! Run driver and benchmark harness: random tensor generation, running any
//! algorithm on any coordinate file with metrics capture, and sweep suites
//! driven by a plain-text spec file producing CSV.

mod spec;
mod suite;

pub use spec::{parse_bytes, parse_dims, parse_spec, BenchGroup};
pub use suite::{aggregate_csv, bench_suite, SuiteOptions, CSV_HEADER};

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coo::{parse_coo, CooFile, CooTensor};
use crate::decomp::{
    ho_svd, hooi, multislice_projection, slice_projection, ConvergenceConfig, DecompOptions,
    RunResult, StoreSet, TensorInput, Terminated,
};
use crate::eig::GramStyle;
use crate::error::{Error, Result};
use crate::mem::{measure, MemReport};
use crate::store::{build_slice_store, BuildOptions, SliceAxes, SliceStore, MANIFEST_NAME};
use crate::tensor::MAX_ORDER;

/// Peak instrumented allocation inside `f`; see [`crate::mem::measure`].
pub fn track_peak_bytes<R>(f: impl FnOnce() -> R) -> (R, MemReport) {
    measure(f)
}

/// Algorithm selector shared by the CLI and the bench spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoId {
    HoSvd,
    Hooi,
    Sp,
    Mp,
}

impl AlgoId {
    pub const ALL: [AlgoId; 4] = [AlgoId::HoSvd, AlgoId::Hooi, AlgoId::Sp, AlgoId::Mp];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hosvd" | "ho-svd" => Ok(AlgoId::HoSvd),
            "hooi" => Ok(AlgoId::Hooi),
            "sp" => Ok(AlgoId::Sp),
            "mp" => Ok(AlgoId::Mp),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm {:?} (expected hosvd, hooi, sp or mp)",
                other
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AlgoId::HoSvd => "hosvd",
            AlgoId::Hooi => "hooi",
            AlgoId::Sp => "sp",
            AlgoId::Mp => "mp",
        }
    }

    pub fn is_out_of_core(&self) -> bool {
        matches!(self, AlgoId::Sp | AlgoId::Mp)
    }
}

impl std::fmt::Display for AlgoId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Writes a random sparse tensor straight to disk: every cell is included
/// independently with probability `density` and valued uniformly in `[0,1)`.
/// Cells are visited in index order with the last mode fastest, so the file
/// arrives pre-sorted by mode 0. The dense tensor is never materialized.
pub fn gen_random_tensor(dims: &[usize], density: f64, seed: u64, out: &Path) -> Result<CooFile> {
    if dims.len() < 2 || dims.len() > MAX_ORDER {
        return Err(Error::UnsupportedOrder(dims.len()));
    }
    if dims.iter().any(|&d| d == 0 || d > u32::MAX as usize) {
        return Err(Error::InvalidArgument("dimensions out of range".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density must be in (0, 1], got {}",
            density
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = BufWriter::new(file);

    let order = dims.len();
    let mut index = vec![1usize; order];
    let mut nnz = 0u64;
    let mut sq_norm = 0.0f64;
    let total: u64 = dims.iter().map(|&d| d as u64).product();
    let mut line = String::with_capacity(64);
    for _ in 0..total {
        if rng.gen::<f64>() < density {
            let value: f64 = rng.gen();
            line.clear();
            for &i in &index {
                line.push_str(itoa(i).as_str());
                line.push(' ');
            }
            line.push_str(&value.to_string());
            line.push('\n');
            w.write_all(line.as_bytes())
                .map_err(|e| Error::io(out, e))?;
            nnz += 1;
            sq_norm += value * value;
        }
        // Odometer, last mode fastest.
        for m in (0..order).rev() {
            index[m] += 1;
            if index[m] <= dims[m] {
                break;
            }
            index[m] = 1;
        }
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    Ok(CooFile {
        path: out.to_path_buf(),
        dims: dims.to_vec(),
        nnz,
        records: nnz,
        sq_norm,
    })
}

fn itoa(v: usize) -> String {
    v.to_string()
}

/// Everything needed to run one decomposition on one input file.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub algo: AlgoId,
    pub input: PathBuf,
    pub dims: Vec<usize>,
    pub core_dims: Vec<usize>,
    pub cfg: ConvergenceConfig,
    /// Drives SP's random initialization; ignored by the others.
    pub seed: u64,
    pub sort_buffer: usize,
    pub slab_size: Option<usize>,
    /// Where slice stores live; defaults to `<input>.stores` next to the
    /// input.
    pub store_dir: Option<PathBuf>,
    /// Decomposition container destination; none skips writing.
    pub out_model: Option<PathBuf>,
    pub gram_style: GramStyle,
    pub update_order: Option<Vec<usize>>,
    /// Error after the run if tracked working memory exceeded this.
    pub mem_cap: Option<u64>,
}

impl RunRequest {
    pub fn new(
        algo: AlgoId,
        input: impl Into<PathBuf>,
        dims: Vec<usize>,
        core: Vec<usize>,
    ) -> Self {
        Self {
            algo,
            input: input.into(),
            dims,
            core_dims: core,
            cfg: ConvergenceConfig::default(),
            seed: 0,
            sort_buffer: crate::extsort::DEFAULT_BUFFER_BYTES,
            slab_size: None,
            store_dir: None,
            out_model: None,
            gram_style: GramStyle::Direct,
            update_order: None,
            mem_cap: None,
        }
    }
}

/// Per-run record mirroring the usual benchmark columns: fit, iterations,
/// wall times (decomposition and store construction separately), tracked
/// peak bytes split into working and sort-buffer components, and file sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algorithm: AlgoId,
    pub dims: Vec<usize>,
    pub core_dims: Vec<usize>,
    pub density: f64,
    pub nnz: u64,
    pub fit: f64,
    pub iterations: usize,
    pub terminated_by: Terminated,
    pub decomp_seconds: f64,
    pub store_build_seconds: f64,
    pub peak_work_bytes: u64,
    pub peak_sort_bytes: u64,
    pub peak_total_bytes: u64,
    pub input_bytes: u64,
    pub output_bytes: u64,
}

/// The stores an algorithm walks, in a deterministic order. In-RAM
/// algorithms need none; SP needs one store per update step (plus the core
/// store); MP needs every single-mode store (order 3) or every mode pair
/// (order 4).
pub fn required_axes(
    algo: AlgoId,
    order: usize,
    update_order: Option<&[usize]>,
) -> Result<Vec<SliceAxes>> {
    use crate::decomp::{axes_fixing_all_but, core_axes};
    use std::collections::BTreeSet;

    if !algo.is_out_of_core() {
        return Ok(Vec::new());
    }
    if !(3..=4).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut set = BTreeSet::new();
    set.insert(core_axes(order));
    match algo {
        AlgoId::Sp => {
            let default: Vec<usize> = (0..order).collect();
            let ord = update_order.unwrap_or(&default);
            let mut seen = vec![false; order];
            if ord.len() != order
                || ord
                    .iter()
                    .any(|&m| m >= order || std::mem::replace(&mut seen[m], true))
            {
                return Err(Error::InvalidArgument(format!(
                    "update order {:?} is not a permutation of 0..{}",
                    ord, order
                )));
            }
            for (k, &n) in ord.iter().enumerate() {
                let p = ord[(k + order - 1) % order];
                set.insert(axes_fixing_all_but(order, n, p));
            }
        }
        AlgoId::Mp => {
            for n in 0..order {
                for p in (0..order).filter(|&p| p != n) {
                    set.insert(axes_fixing_all_but(order, n, p));
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(set.into_iter().collect())
}

/// Runs one decomposition, building or reusing slice stores as needed, and
/// reports metrics. Wall time covers the decomposition call only; store
/// construction is timed separately. The memory scope covers both.
pub fn run(req: &RunRequest) -> Result<(RunResult, RunMetrics)> {
    let coo = parse_coo(&req.input, &req.dims)?;
    let input_bytes = std::fs::metadata(&req.input)
        .map_err(|e| Error::io(&req.input, e))?
        .len();
    let cells: f64 = req.dims.iter().map(|&d| d as f64).product();
    let density = coo.nnz as f64 / cells;

    let opts = DecompOptions {
        gram_style: req.gram_style,
        capture_trace: false,
        update_order: req.update_order.clone(),
    };

    let mut store_build_seconds = 0.0f64;
    let mut decomp_seconds = 0.0f64;

    let (result, report) = measure(|| -> Result<RunResult> {
        match req.algo {
            AlgoId::HoSvd | AlgoId::Hooi => {
                let start = Instant::now();
                let tensor = CooTensor::read(&coo)?;
                let input = TensorInput::Sparse(&tensor);
                let out = match req.algo {
                    AlgoId::HoSvd => ho_svd(input, &req.core_dims, &opts),
                    _ => hooi(input, &req.core_dims, &req.cfg, &opts),
                };
                decomp_seconds = start.elapsed().as_secs_f64();
                out
            }
            AlgoId::Sp | AlgoId::Mp => {
                let start = Instant::now();
                let stores = prepare_stores(&coo, req)?;
                store_build_seconds = start.elapsed().as_secs_f64();

                let start = Instant::now();
                let out = match req.algo {
                    AlgoId::Sp => {
                        slice_projection(&stores, &req.core_dims, &req.cfg, req.seed, &opts)
                    }
                    _ => multislice_projection(&stores, &req.core_dims, &req.cfg, &opts),
                };
                decomp_seconds = start.elapsed().as_secs_f64();
                out
            }
        }
    });
    let result = result?;

    let mut output_bytes = 0;
    if let Some(out) = &req.out_model {
        crate::decomp::save_model(out, &result.model)?;
        output_bytes = std::fs::metadata(out).map_err(|e| Error::io(out, e))?.len();
    }

    if let Some(cap) = req.mem_cap {
        if report.peak_work_bytes > cap {
            return Err(Error::MemoryBudget {
                used: report.peak_work_bytes,
                cap,
            });
        }
    }

    let metrics = RunMetrics {
        algorithm: req.algo,
        dims: req.dims.clone(),
        core_dims: req.core_dims.clone(),
        density,
        nnz: coo.nnz,
        fit: result.final_fit,
        iterations: result.iterations,
        terminated_by: result.terminated_by,
        decomp_seconds,
        store_build_seconds,
        peak_work_bytes: report.peak_work_bytes,
        peak_sort_bytes: report.peak_sort_bytes,
        peak_total_bytes: report.peak_total_bytes,
        input_bytes,
        output_bytes,
    };
    Ok((result, metrics))
}

/// SHA-256 of the file contents, streamed.
pub fn content_hash(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

/// Builds (or reuses, keyed by content hash and build parameters) every
/// store the requested run needs.
fn prepare_stores(coo: &CooFile, req: &RunRequest) -> Result<StoreSet> {
    let order = req.dims.len();
    let axes_list = required_axes(req.algo, order, req.update_order.as_deref())?;

    let file_hash = content_hash(&req.input)?;
    let store_dir = req.store_dir.clone().unwrap_or_else(|| {
        let mut p = req.input.clone();
        p.set_extension("stores");
        p
    });
    std::fs::create_dir_all(&store_dir).map_err(|e| Error::io(&store_dir, e))?;

    let mut set = StoreSet::new();
    for axes in axes_list {
        // The sort buffer is absent on purpose: any buffer size produces the
        // same store bytes, so it must not invalidate the cache.
        let key_src = format!(
            "{}|dims={:?}|axes={}|slab={:?}|tslc={}",
            file_hash,
            req.dims,
            axes.label(),
            req.slab_size,
            crate::store::TSLC_VERSION
        );
        let key = {
            let mut h = Sha256::new();
            h.update(key_src.as_bytes());
            hex(&h.finalize())
        };
        let root = store_dir.join(format!("{}-{}", axes.label(), &key[..16]));

        let reuse = root.join(MANIFEST_NAME).exists()
            && SliceStore::open(&root)
                .map(|s| s.manifest().content_key == key && s.axes() == axes)
                .unwrap_or(false);
        let store = if reuse {
            SliceStore::open(&root)?
        } else {
            if root.exists() {
                std::fs::remove_dir_all(&root).map_err(|e| Error::io(&root, e))?;
            }
            let opts = BuildOptions {
                slab_size: req.slab_size,
                buffer_bytes: req.sort_buffer,
                keep_sorted: false,
                content_key: key,
            };
            build_slice_store(coo, axes, &root, &opts)?
        };
        set.insert(store);
    }
    Ok(set)
}
