//! End-to-end coverage of the file pipeline: external sort at forced
//! multi-run scale, slice store round-trips, and the command-line interface
//! from generation through inspection.

mod common;

use std::path::Path;
use std::process::Command;

use ooctucker::bench::gen_random_tensor;
use ooctucker::coo::parse_coo;
use ooctucker::extsort::{external_sort_by_mode, MIN_BUFFER_BYTES};
use ooctucker::store::{build_slice_store, BuildOptions, SliceAxes, SliceStore};
use ooctucker::tensor::DenseTensor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 1e5 records, buffer forced down to the minimum so the sort spills several
/// runs; the merged output must equal an in-memory stable sort.
#[test]
fn external_sort_matches_in_memory_stable_sort_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("records.txt");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lines: Vec<String> = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        lines.push(format!(
            "{} {} {} {:.17}",
            rng.gen_range(1..=40),
            rng.gen_range(1..=40),
            rng.gen_range(1..=40),
            rng.gen::<f64>()
        ));
    }
    std::fs::write(&input, lines.join("\n") + "\n").unwrap();

    let output = dir.path().join("sorted.txt");
    let stats = external_sort_by_mode(&input, &output, 1, MIN_BUFFER_BYTES, dir.path()).unwrap();
    assert_eq!(stats.lines, 100_000);
    assert!(stats.runs >= 4, "only {} runs", stats.runs);

    let mut expect = lines.clone();
    expect.sort_by_key(|l| l.split_whitespace().nth(1).unwrap().parse::<u64>().unwrap());
    let got = std::fs::read_to_string(&output).unwrap();
    assert_eq!(got, expect.join("\n") + "\n");

    // The input file is untouched.
    assert_eq!(
        std::fs::read_to_string(&input).unwrap(),
        lines.join("\n") + "\n"
    );
}

/// Store reassembly reproduces the dense tensor exactly at the 1e5-record
/// scale, for every mode.
#[test]
fn slice_store_reassembles_dense_tensor_at_scale() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.txt");
    let coo = gen_random_tensor(&[40, 42, 44], 0.15, 11, &input).unwrap();
    let tensor = ooctucker::coo::CooTensor::read(&coo).unwrap();
    let dense = tensor.to_dense().unwrap();

    for mode in 0..3 {
        let opts = BuildOptions {
            buffer_bytes: MIN_BUFFER_BYTES,
            ..BuildOptions::default()
        };
        let store = build_slice_store(
            &coo,
            SliceAxes::Mode(mode),
            &dir.path().join(format!("store{mode}")),
            &opts,
        )
        .unwrap();
        let (rm, cm) = store.axes().remaining(3);
        let mut rebuilt = DenseTensor::zeros(dense.dims().to_vec()).unwrap();
        let mut nnz = 0u64;
        for seq in 0..store.num_slices() {
            let s = store.load_slice(seq).unwrap();
            nnz += s.nnz() as u64;
            for (r, c, v) in s.iter() {
                let mut idx = [0usize; 3];
                idx[mode] = seq;
                idx[rm] = r;
                idx[cm] = c;
                rebuilt.set(&idx, v);
            }
        }
        assert_eq!(nnz, coo.nnz);
        assert_eq!(rebuilt.max_abs_diff(&dense), 0.0, "mode {mode}");
    }
}

/// Many random slices round-trip bit-exactly through slab files.
#[test]
fn thousand_slices_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.txt");
    // 1000 slices along mode 0.
    let coo = gen_random_tensor(&[1000, 12, 13], 0.05, 3, &input).unwrap();
    let opts = BuildOptions {
        slab_size: Some(64),
        ..BuildOptions::default()
    };
    let store = build_slice_store(&coo, SliceAxes::Mode(0), &dir.path().join("s"), &opts).unwrap();
    assert_eq!(store.num_slices(), 1000);
    assert!(store.manifest().slabs.len() >= 15);

    let reopened = SliceStore::open(store.root()).unwrap();
    let tensor = ooctucker::coo::CooTensor::read(&coo).unwrap();
    let dense = tensor.to_dense().unwrap();
    let mut checked = 0usize;
    for seq in 0..1000 {
        let s = reopened.load_slice(seq).unwrap();
        for (r, c, v) in s.iter() {
            // Bit-exact: the text value parsed once equals the stored value.
            assert_eq!(v, dense.get(&[seq, r, c]));
            checked += 1;
        }
    }
    assert_eq!(checked as u64, coo.nnz);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ooctucker"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn cli_gen_run_inspect_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.txt");
    let model = dir.path().join("m.tkrd");
    let metrics = dir.path().join("metrics.json");

    run_ok(bin().args([
        "gen",
        "--dims",
        "20x22x24",
        "--density",
        "0.1",
        "--seed",
        "3",
        "--out",
        input.to_str().unwrap(),
    ]));
    assert!(input.exists());

    let stdout = run_ok(bin().args([
        "run",
        "--algo",
        "mp",
        "--input",
        input.to_str().unwrap(),
        "--dims",
        "20x22x24",
        "--core",
        "2x2x2",
        "--out",
        model.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
        "--store-dir",
        dir.path().join("stores").to_str().unwrap(),
    ]));
    assert!(stdout.contains("mp: fit"), "{stdout}");
    assert!(model.exists());

    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(parsed["algorithm"], "mp");
    assert!(parsed["fit"].as_f64().unwrap() > 0.0);
    assert!(parsed["peak_work_bytes"].as_u64().unwrap() > 0);

    let stdout = run_ok(bin().args([
        "inspect",
        "--model",
        model.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
    ]));
    assert!(stdout.contains("dims:       20x22x24"), "{stdout}");
    assert!(stdout.contains("core:       2x2x2"), "{stdout}");
    // Inspect's fit agrees with the run's reported fit.
    let fit_line = stdout.lines().find(|l| l.starts_with("fit:")).unwrap();
    let inspected: f64 = fit_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((inspected - parsed["fit"].as_f64().unwrap()).abs() < 1e-5);
}

/// A second identical run reuses the cached slice stores (same directory
/// contents, no rebuild) and produces an identical container.
#[test]
fn cli_store_cache_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.txt");
    run_ok(bin().args([
        "gen",
        "--dims",
        "15x15x15",
        "--density",
        "0.2",
        "--seed",
        "5",
        "--out",
        input.to_str().unwrap(),
    ]));

    let stores = dir.path().join("stores");
    let model_a = dir.path().join("a.tkrd");
    let model_b = dir.path().join("b.tkrd");
    let run_args = |model: &Path| {
        vec![
            "run".to_string(),
            "--algo".into(),
            "sp".into(),
            "--input".into(),
            input.to_str().unwrap().into(),
            "--dims".into(),
            "15x15x15".into(),
            "--core".into(),
            "3x3x3".into(),
            "--seed".into(),
            "11".into(),
            "--store-dir".into(),
            stores.to_str().unwrap().into(),
            "--out".into(),
            model.to_str().unwrap().into(),
        ]
    };
    run_ok(bin().args(run_args(&model_a)));
    let manifest_mtime = |root: &Path| {
        let mut times = Vec::new();
        for entry in walk(root) {
            times.push(std::fs::metadata(&entry).unwrap().modified().unwrap());
        }
        times
    };
    let before = manifest_mtime(&stores);
    run_ok(bin().args(run_args(&model_b)));
    let after = manifest_mtime(&stores);
    assert_eq!(before, after, "stores were rebuilt instead of reused");
    assert_eq!(
        std::fs::read(&model_a).unwrap(),
        std::fs::read(&model_b).unwrap(),
        "same seed must give bit-identical containers"
    );
}

fn walk(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    if root.is_dir() {
        for entry in std::fs::read_dir(root).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// Corrupting a slab byte is caught by the block checksum on load.
#[test]
fn corrupt_slab_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.txt");
    let coo = gen_random_tensor(&[6, 6, 6], 0.5, 1, &input).unwrap();
    let store = build_slice_store(
        &coo,
        SliceAxes::Mode(0),
        &dir.path().join("s"),
        &BuildOptions::default(),
    )
    .unwrap();
    let slab = store.root().join(&store.manifest().slabs[0]);
    let mut bytes = std::fs::read(&slab).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&slab, bytes).unwrap();

    let reopened = SliceStore::open(store.root()).unwrap();
    let failures = (0..reopened.num_slices())
        .filter(|&s| reopened.load_slice(s).is_err())
        .count();
    assert!(failures > 0, "corruption went unnoticed");
}

/// The sweeps shipped in specs/ stay parseable.
#[test]
fn shipped_specs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let desk = ooctucker::bench::parse_spec(&root.join("desk.spec")).unwrap();
    assert_eq!(desk.len(), 3);
    assert_eq!(desk[0].cases.len(), 5);
    assert_eq!(desk[1].cases.len(), 9);
    assert_eq!(desk[2].cases.len(), 9);
    let paper = ooctucker::bench::parse_spec(&root.join("paper-scale.spec")).unwrap();
    assert_eq!(paper.len(), 2);
}

/// Sorted text intermediates share the input format and can be kept.
#[test]
fn kept_sorted_file_parses_as_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.txt");
    let coo = gen_random_tensor(&[8, 9, 10], 0.2, 2, &input).unwrap();
    let opts = BuildOptions {
        keep_sorted: true,
        ..BuildOptions::default()
    };
    let store = build_slice_store(&coo, SliceAxes::Mode(1), &dir.path().join("s"), &opts).unwrap();
    let sorted = store.root().join("sorted.txt");
    assert!(sorted.exists());
    let reparsed = parse_coo(&sorted, &[8, 9, 10]).unwrap();
    assert_eq!(reparsed.nnz, coo.nnz);
    assert!((reparsed.sq_norm - coo.sq_norm).abs() < 1e-12);
}
