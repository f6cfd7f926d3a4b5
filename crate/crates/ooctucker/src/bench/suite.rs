//! Runs spec-file sweeps into CSV and aggregates the results.
//!
//! One row per `(group, case, algorithm, seed)`. Tensors and slice stores
//! are cached in the work directory keyed by their parameters, so repeated
//! sweeps and shared cases do not regenerate anything. With timing omitted,
//! two runs of the same spec produce byte-identical CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{gen_random_tensor, run, RunMetrics, RunRequest};
use crate::decomp::Terminated;
use crate::error::{Error, Result};

/// Version 1 of the CSV schema.
pub const CSV_HEADER: &[&str] = &[
    "group",
    "algorithm",
    "dims",
    "core",
    "density",
    "seed",
    "nnz",
    "fit",
    "iterations",
    "terminated_by",
    "decomp_seconds",
    "store_build_seconds",
    "peak_work_bytes",
    "peak_sort_bytes",
    "peak_total_bytes",
    "input_bytes",
    "output_bytes",
];

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Write zeros in the timing columns; makes the CSV reproducible
    /// byte for byte.
    pub omit_timing: bool,
    /// Where generated tensors, stores and models live. Defaults to
    /// `bench-work` next to the output CSV.
    pub work_dir: Option<PathBuf>,
}

fn dims_label(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

/// Executes every group of the spec file, appending one CSV row per run.
pub fn bench_suite(spec_path: &Path, out_csv: &Path, opts: &SuiteOptions) -> Result<()> {
    let groups = super::parse_spec(spec_path)?;
    let work = opts.work_dir.clone().unwrap_or_else(|| {
        out_csv
            .parent()
            .unwrap_or(Path::new("."))
            .join("bench-work")
    });
    let tensors_dir = work.join("tensors");
    let stores_dir = work.join("stores");
    let models_dir = work.join("models");
    for d in [&tensors_dir, &stores_dir, &models_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let mut writer = csv::Writer::from_path(out_csv).map_err(|e| csv_err(out_csv, e))?;
    writer
        .write_record(CSV_HEADER)
        .map_err(|e| csv_err(out_csv, e))?;

    for group in &groups {
        for (dims, core) in &group.cases {
            for &seed in &group.seeds {
                let tensor_path = tensors_dir.join(format!(
                    "t-{}-d{}-s{}.txt",
                    dims_label(dims),
                    group.density,
                    seed
                ));
                if !tensor_path.exists() {
                    gen_random_tensor(dims, group.density, seed, &tensor_path)?;
                }
                for &algo in &group.algos {
                    let model_path = models_dir.join(format!(
                        "{}-{}-c{}-s{}.tkrd",
                        algo,
                        dims_label(dims),
                        dims_label(core),
                        seed
                    ));
                    let mut req = RunRequest::new(algo, &tensor_path, dims.clone(), core.clone());
                    req.cfg = group.cfg;
                    req.seed = seed;
                    req.sort_buffer = group.sort_buffer;
                    req.slab_size = group.slab_size;
                    req.store_dir = Some(stores_dir.clone());
                    req.out_model = Some(model_path);
                    let (_, metrics) = run(&req)?;
                    write_row(&mut writer, out_csv, &group.name, seed, &metrics, opts)?;
                }
            }
        }
    }
    writer.flush().map_err(|e| Error::io(out_csv, e))?;
    Ok(())
}

fn write_row(
    writer: &mut csv::Writer<std::fs::File>,
    out_csv: &Path,
    group: &str,
    seed: u64,
    m: &RunMetrics,
    opts: &SuiteOptions,
) -> Result<()> {
    let fmt_time = |t: f64| {
        if opts.omit_timing {
            "0.000".to_string()
        } else {
            format!("{:.3}", t)
        }
    };
    let terminated = match m.terminated_by {
        Terminated::Threshold => "threshold",
        Terminated::MaxIterations => "max_iterations",
    };
    writer
        .write_record([
            group,
            m.algorithm.name(),
            &dims_label(&m.dims),
            &dims_label(&m.core_dims),
            &m.density.to_string(),
            &seed.to_string(),
            &m.nnz.to_string(),
            &m.fit.to_string(),
            &m.iterations.to_string(),
            terminated,
            &fmt_time(m.decomp_seconds),
            &fmt_time(m.store_build_seconds),
            &m.peak_work_bytes.to_string(),
            &m.peak_sort_bytes.to_string(),
            &m.peak_total_bytes.to_string(),
            &m.input_bytes.to_string(),
            &m.output_bytes.to_string(),
        ])
        .map_err(|e| csv_err(out_csv, e))?;
    Ok(())
}

/// Collapses a suite CSV over seeds: one row per
/// `(group, algorithm, dims, core)` with means of the numeric columns.
pub fn aggregate_csv(in_csv: &Path, out_csv: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(in_csv).map_err(|e| csv_err(in_csv, e))?;
    let headers = reader.headers().map_err(|e| csv_err(in_csv, e))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "column {:?} missing from {}",
                name,
                in_csv.display()
            ))
        })
    };
    let c_group = col("group")?;
    let c_algo = col("algorithm")?;
    let c_dims = col("dims")?;
    let c_core = col("core")?;
    let c_fit = col("fit")?;
    let c_iters = col("iterations")?;
    let c_dec = col("decomp_seconds")?;
    let c_store = col("store_build_seconds")?;
    let c_work = col("peak_work_bytes")?;
    let c_total = col("peak_total_bytes")?;

    #[derive(Default)]
    struct Acc {
        n: u64,
        fit: f64,
        iters: f64,
        dec: f64,
        store: f64,
        work: f64,
        total: f64,
    }
    let mut acc: BTreeMap<(String, String, String, String), Acc> = BTreeMap::new();
    for record in reader.records() {
        let r = record.map_err(|e| csv_err(in_csv, e))?;
        let key = (
            r[c_group].to_string(),
            r[c_algo].to_string(),
            r[c_dims].to_string(),
            r[c_core].to_string(),
        );
        let a = acc.entry(key).or_default();
        let parse = |i: usize| -> Result<f64> {
            r[i].parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "non-numeric field {:?} in {}",
                    &r[i],
                    in_csv.display()
                ))
            })
        };
        a.n += 1;
        a.fit += parse(c_fit)?;
        a.iters += parse(c_iters)?;
        a.dec += parse(c_dec)?;
        a.store += parse(c_store)?;
        a.work += parse(c_work)?;
        a.total += parse(c_total)?;
    }

    let mut writer = csv::Writer::from_path(out_csv).map_err(|e| csv_err(out_csv, e))?;
    writer
        .write_record([
            "group",
            "algorithm",
            "dims",
            "core",
            "seeds",
            "mean_fit",
            "mean_iterations",
            "mean_decomp_seconds",
            "mean_store_build_seconds",
            "mean_peak_work_bytes",
            "mean_peak_total_bytes",
        ])
        .map_err(|e| csv_err(out_csv, e))?;
    for ((group, algo, dims, core), a) in &acc {
        let n = a.n as f64;
        writer
            .write_record([
                group.as_str(),
                algo.as_str(),
                dims.as_str(),
                core.as_str(),
                &a.n.to_string(),
                &(a.fit / n).to_string(),
                &(a.iters / n).to_string(),
                &format!("{:.3}", a.dec / n),
                &format!("{:.3}", a.store / n),
                &format!("{:.0}", a.work / n),
                &format!("{:.0}", a.total / n),
            ])
            .map_err(|e| csv_err(out_csv, e))?;
    }
    writer.flush().map_err(|e| Error::io(out_csv, e))?;
    Ok(())
}
