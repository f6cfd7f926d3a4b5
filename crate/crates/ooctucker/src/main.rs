use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use ooctucker::bench::{
    aggregate_csv, bench_suite, gen_random_tensor, parse_bytes, parse_dims, run, AlgoId,
    RunRequest, SuiteOptions,
};
use ooctucker::coo::{parse_coo, CooTensor};
use ooctucker::decomp::{load_model, ConvergenceConfig};
use ooctucker::eig::GramStyle;

#[derive(Parser)]
#[command(
    name = "ooctucker",
    about = "Tucker decomposition of large sparse tensors, in RAM or out of core",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a random sparse tensor as a coordinate text file.
    Gen(GenArgs),
    /// Decompose one tensor file with a chosen algorithm.
    Run(RunArgs),
    /// Run a spec-file sweep and write one CSV row per run.
    Bench(BenchArgs),
    /// Collapse a bench CSV over seeds (means per instance and algorithm).
    Aggregate(AggregateArgs),
    /// Print what a decomposition container holds; optionally its fit
    /// against an input tensor.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Tensor dimensions, e.g. 100x110x120.
    #[arg(long)]
    dims: String,
    /// Probability that a cell is nonzero, in (0, 1].
    #[arg(long)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output coordinate file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// hosvd, hooi, sp or mp.
    #[arg(long)]
    algo: String,
    /// Input coordinate file.
    #[arg(long)]
    input: PathBuf,
    /// Tensor dimensions, e.g. 100x110x120.
    #[arg(long)]
    dims: String,
    /// Core dimensions, e.g. 10x11x12.
    #[arg(long)]
    core: String,
    /// Convergence threshold (change in fit / core growth).
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Seed for sp's random initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// External sort buffer (bytes; KiB/MiB/GiB suffixes accepted).
    #[arg(long, default_value = "256MiB")]
    sort_buffer: String,
    /// Slices per slab file; omit for automatic (~64 MiB slabs).
    #[arg(long)]
    slab_size: Option<usize>,
    /// Directory for slice stores (default: <input>.stores).
    #[arg(long)]
    store_dir: Option<PathBuf>,
    /// Write the decomposition container here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write run metrics as JSON here.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Eigendecompose M·Mᵀ instead of M in every factor update.
    #[arg(long)]
    square_gram: bool,
    /// sp only: mode update order as 1-based indices, e.g. 2,3,1.
    #[arg(long)]
    update_order: Option<String>,
    /// Fail if tracked working memory exceeds this many bytes.
    #[arg(long)]
    mem_cap: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Spec file (see the book for the grammar).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
    /// Scratch directory for tensors, stores and models.
    #[arg(long)]
    work_dir: Option<PathBuf>,
    /// Zero the timing columns so the CSV is byte-reproducible.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    in_csv: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// Decomposition container (TKRD).
    #[arg(long)]
    model: PathBuf,
    /// Coordinate file to score the model against.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn main() {
    if let Err(e) = dispatch() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch() -> Result<(), Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Gen(a) => {
            let dims = parse_dims(&a.dims)?;
            let coo = gen_random_tensor(&dims, a.density, a.seed, &a.out)?;
            println!(
                "wrote {} ({} nonzeros, density {:.4})",
                a.out.display(),
                coo.nnz,
                coo.nnz as f64 / dims.iter().map(|&d| d as f64).product::<f64>()
            );
        }
        Command::Run(a) => {
            let dims = parse_dims(&a.dims)?;
            let core = parse_dims(&a.core)?;
            let update_order = a
                .update_order
                .as_deref()
                .map(parse_update_order)
                .transpose()?;
            let mut req = RunRequest::new(AlgoId::parse(&a.algo)?, &a.input, dims, core);
            req.cfg = ConvergenceConfig {
                fit_threshold: a.tol,
                core_growth_threshold: a.tol,
                max_iterations: a.max_iters,
            };
            req.seed = a.seed;
            req.sort_buffer = parse_bytes(&a.sort_buffer)?;
            req.slab_size = a.slab_size;
            req.store_dir = a.store_dir;
            req.out_model = a.out.clone();
            req.gram_style = if a.square_gram {
                GramStyle::Squared
            } else {
                GramStyle::Direct
            };
            req.update_order = update_order;
            req.mem_cap = a
                .mem_cap
                .as_deref()
                .map(parse_bytes)
                .transpose()?
                .map(|v| v as u64);

            let (result, metrics) = run(&req)?;
            println!(
                "{}: fit {:.6} in {} iteration(s) ({})",
                metrics.algorithm,
                metrics.fit,
                metrics.iterations,
                match result.terminated_by {
                    ooctucker::decomp::Terminated::Threshold => "threshold",
                    ooctucker::decomp::Terminated::MaxIterations => "max iterations",
                }
            );
            println!(
                "time: {:.3}s decomposition, {:.3}s store build",
                metrics.decomp_seconds, metrics.store_build_seconds
            );
            println!(
                "tracked peak: {} work bytes, {} sort bytes",
                metrics.peak_work_bytes, metrics.peak_sort_bytes
            );
            if result.rank_completed {
                println!("note: a core dimension exceeded the numerical n-rank; orthonormal completion used");
            }
            if result.empty_slices {
                println!("note: some slice index had no nonzeros");
            }
            if let Some(path) = &a.metrics {
                std::fs::write(path, serde_json::to_string_pretty(&metrics)?)?;
            }
        }
        Command::Bench(a) => {
            let opts = SuiteOptions {
                omit_timing: a.omit_timing,
                work_dir: a.work_dir,
            };
            bench_suite(&a.spec, &a.out_csv, &opts)?;
            println!("wrote {}", a.out_csv.display());
        }
        Command::Aggregate(a) => {
            aggregate_csv(&a.in_csv, &a.out_csv)?;
            println!("wrote {}", a.out_csv.display());
        }
        Command::Inspect(a) => {
            let model = load_model(&a.model)?;
            let dims = model.dims();
            println!("order:      {}", model.order());
            println!("dims:       {}", label(&dims));
            println!("core:       {}", label(model.core_dims()));
            println!("core norm:  {:.6}", model.core().frobenius_norm());
            if let Some(input) = &a.input {
                let coo = parse_coo(input, &dims)?;
                let tensor = CooTensor::read(&coo)?;
                // ‖x − x̂‖² = ‖x‖² − 2⟨x, x̂⟩ + ‖core‖² for orthonormal factors.
                let dot = tensor.dot_reconstruction(model.core(), model.factors())?;
                let x_sq = coo.sq_norm;
                let g_sq = model.core().sq_norm();
                if x_sq == 0.0 {
                    return Err("input tensor has zero norm; fit undefined".into());
                }
                let fit = 1.0 - ((x_sq - 2.0 * dot + g_sq).max(0.0) / x_sq).sqrt();
                println!("fit:        {:.6}", fit);
            }
        }
    }
    Ok(())
}

fn label(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

fn parse_update_order(s: &str) -> Result<Vec<usize>, Box<dyn std::error::Error>> {
    let order: Result<Vec<usize>, _> = s
        .split([',', 'x'])
        .map(|t| t.trim().parse::<usize>())
        .collect();
    let order = order.map_err(|_| format!("cannot parse update order from {s:?}"))?;
    if order.contains(&0) {
        return Err("update order uses 1-based mode numbers".into());
    }
    Ok(order.iter().map(|&m| m - 1).collect())
}
