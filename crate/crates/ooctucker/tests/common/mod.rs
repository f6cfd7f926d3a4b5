//! Shared helpers for the integration tests, most importantly literal dense
//! re-implementations of the SP and MP update rules. These walk dense
//! slices of an in-RAM tensor with plain matrix products, independently of
//! the slice-store path they are used to check.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ooctucker::coo::{parse_coo, CooFile};
use ooctucker::decomp::{delta_core_growth, random_factor, ConvergenceConfig, StoreSet};
use ooctucker::eig::{factor_from_gram, GramStyle};
use ooctucker::store::{build_slice_store, BuildOptions, SliceAxes};
use ooctucker::tensor::fit;
use ooctucker::{DenseTensor, Matrix};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One reference sweep: Grams in update order, the core, and the
/// convergence metric (core growth for SP, fit for MP).
pub struct RefIteration {
    pub grams: Vec<(usize, Matrix)>,
    pub core: DenseTensor,
    pub metric: f64,
}

pub struct RefTrace {
    pub init_grams: Vec<(usize, Matrix)>,
    pub iterations: Vec<RefIteration>,
    pub factors: Vec<Matrix>,
    pub final_fit: f64,
}

fn slice(x: &DenseTensor, fixed: &[(usize, usize)]) -> Matrix {
    x.slice_matrix(fixed).unwrap()
}

fn project_all(x: &DenseTensor, factors: &[Matrix]) -> DenseTensor {
    let refs: Vec<Option<&Matrix>> = factors.iter().map(Some).collect();
    x.project_transposed(&refs).unwrap()
}

fn dense_fit(x: &DenseTensor, core: &DenseTensor, factors: &[Matrix]) -> f64 {
    let refs: Vec<&Matrix> = factors.iter().collect();
    let xhat = core.tucker_apply(&refs).unwrap();
    fit(x, &xhat).unwrap()
}

/// Slice projection for third-order tensors, dense transcription.
pub fn ref_sp3(
    x: &DenseTensor,
    core_dims: &[usize],
    cfg: &ConvergenceConfig,
    seed: u64,
    style: GramStyle,
) -> RefTrace {
    let dims = x.dims();
    let (j0, j1, j2) = (core_dims[0], core_dims[1], core_dims[2]);
    let mut c = random_factor(dims[2], j2, seed);
    let mut a;
    let mut b;
    let mut factors: Vec<Matrix>;
    let mut prev_norm = 0.0;
    let mut iterations = Vec::new();
    loop {
        // M13: slices on mode 1, projected through C.
        let mut m13 = Matrix::zeros(dims[0], dims[0]);
        for i in 0..dims[1] {
            let s = slice(x, &[(1, i)]);
            let t = s.mul(&c).unwrap();
            m13.add_aat(&t).unwrap();
        }
        a = factor_from_gram(m13.clone(), j0, style).unwrap().vectors;

        // M21: slices on mode 2, projected through A.
        let mut m21 = Matrix::zeros(dims[1], dims[1]);
        for i in 0..dims[2] {
            let s = slice(x, &[(2, i)]);
            let t = s.tr_mul(&a).unwrap();
            m21.add_aat(&t).unwrap();
        }
        b = factor_from_gram(m21.clone(), j1, style).unwrap().vectors;

        // M32: slices on mode 0, projected through B.
        let mut m32 = Matrix::zeros(dims[2], dims[2]);
        for i in 0..dims[0] {
            let s = slice(x, &[(0, i)]);
            let t = s.tr_mul(&b).unwrap();
            m32.add_aat(&t).unwrap();
        }
        c = factor_from_gram(m32.clone(), j2, style).unwrap().vectors;

        factors = vec![a.clone(), b.clone(), c.clone()];
        let core = project_all(x, &factors);
        let growth = delta_core_growth(prev_norm, core.frobenius_norm()).unwrap();
        prev_norm = core.frobenius_norm();
        let done = growth < cfg.core_growth_threshold || iterations.len() + 1 >= cfg.max_iterations;
        iterations.push(RefIteration {
            grams: vec![(0, m13), (1, m21), (2, m32)],
            core,
            metric: growth,
        });
        if done {
            break;
        }
    }
    let core = iterations.last().unwrap().core.clone();
    let final_fit = dense_fit(x, &core, &factors);
    RefTrace {
        init_grams: Vec::new(),
        iterations,
        factors,
        final_fit,
    }
}

/// Slice projection for fourth-order tensors, dense transcription.
pub fn ref_sp4(
    x: &DenseTensor,
    core_dims: &[usize],
    cfg: &ConvergenceConfig,
    seed: u64,
    style: GramStyle,
) -> RefTrace {
    let dims = x.dims();
    let mut d = random_factor(dims[3], core_dims[3], seed);
    let mut factors: Vec<Matrix>;
    let (mut a, mut b, mut c);
    let mut prev_norm = 0.0;
    let mut iterations = Vec::new();
    loop {
        // Update A: slices on modes 1 and 2, projected through D.
        let mut m14 = Matrix::zeros(dims[0], dims[0]);
        for i in 0..dims[1] {
            for j in 0..dims[2] {
                let s = slice(x, &[(1, i), (2, j)]);
                let t = s.mul(&d).unwrap();
                m14.add_aat(&t).unwrap();
            }
        }
        a = factor_from_gram(m14.clone(), core_dims[0], style)
            .unwrap()
            .vectors;

        // Update B: slices on modes 2 and 3, projected through A.
        let mut m21 = Matrix::zeros(dims[1], dims[1]);
        for i in 0..dims[2] {
            for j in 0..dims[3] {
                let s = slice(x, &[(2, i), (3, j)]);
                let t = s.tr_mul(&a).unwrap();
                m21.add_aat(&t).unwrap();
            }
        }
        b = factor_from_gram(m21.clone(), core_dims[1], style)
            .unwrap()
            .vectors;

        // Update C: slices on modes 0 and 3, projected through B.
        let mut m32 = Matrix::zeros(dims[2], dims[2]);
        for i in 0..dims[0] {
            for j in 0..dims[3] {
                let s = slice(x, &[(0, i), (3, j)]);
                let t = s.tr_mul(&b).unwrap();
                m32.add_aat(&t).unwrap();
            }
        }
        c = factor_from_gram(m32.clone(), core_dims[2], style)
            .unwrap()
            .vectors;

        // Update D: slices on modes 0 and 1, projected through C.
        let mut m43 = Matrix::zeros(dims[3], dims[3]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let s = slice(x, &[(0, i), (1, j)]);
                let t = s.tr_mul(&c).unwrap();
                m43.add_aat(&t).unwrap();
            }
        }
        d = factor_from_gram(m43.clone(), core_dims[3], style)
            .unwrap()
            .vectors;

        factors = vec![a.clone(), b.clone(), c.clone(), d.clone()];
        let core = project_all(x, &factors);
        let growth = delta_core_growth(prev_norm, core.frobenius_norm()).unwrap();
        prev_norm = core.frobenius_norm();
        let done = growth < cfg.core_growth_threshold || iterations.len() + 1 >= cfg.max_iterations;
        iterations.push(RefIteration {
            grams: vec![(0, m14), (1, m21), (2, m32), (3, m43)],
            core,
            metric: growth,
        });
        if done {
            break;
        }
    }
    let core = iterations.last().unwrap().core.clone();
    let final_fit = dense_fit(x, &core, &factors);
    RefTrace {
        init_grams: Vec::new(),
        iterations,
        factors,
        final_fit,
    }
}

/// Multislice projection for third-order tensors, dense transcription
/// (including the pseudo HO-SVD initialization's literal term order).
pub fn ref_mp3(
    x: &DenseTensor,
    core_dims: &[usize],
    cfg: &ConvergenceConfig,
    style: GramStyle,
) -> RefTrace {
    let dims = x.dims();

    // Initialization. B from mode-0 and mode-2 slices:
    let mut m2 = Matrix::zeros(dims[1], dims[1]);
    for i in 0..dims[0] {
        let s = slice(x, &[(0, i)]);
        let t = s.mul_tr(&s).unwrap();
        add_into(&mut m2, &t);
    }
    for i in 0..dims[2] {
        let s = slice(x, &[(2, i)]);
        let t = s.tr_mul(&s).unwrap();
        add_into(&mut m2, &t);
    }
    let mut b = factor_from_gram(m2.clone(), core_dims[1], style)
        .unwrap()
        .vectors;

    let mut m3 = Matrix::zeros(dims[2], dims[2]);
    for i in 0..dims[0] {
        let s = slice(x, &[(0, i)]);
        let t = s.tr_mul(&s).unwrap();
        add_into(&mut m3, &t);
    }
    for i in 0..dims[1] {
        let s = slice(x, &[(1, i)]);
        let t = s.tr_mul(&s).unwrap();
        add_into(&mut m3, &t);
    }
    let mut c = factor_from_gram(m3.clone(), core_dims[2], style)
        .unwrap()
        .vectors;

    let init_grams = vec![(1, m2), (2, m3)];
    let mut a;
    let mut factors: Vec<Matrix>;
    let mut old_fit = 0.0;
    let mut iterations = Vec::new();
    loop {
        let mut m1 = Matrix::zeros(dims[0], dims[0]);
        for i in 0..dims[2] {
            let s = slice(x, &[(2, i)]);
            let t = s.mul(&b).unwrap();
            m1.add_aat(&t).unwrap();
        }
        for i in 0..dims[1] {
            let s = slice(x, &[(1, i)]);
            let t = s.mul(&c).unwrap();
            m1.add_aat(&t).unwrap();
        }
        a = factor_from_gram(m1.clone(), core_dims[0], style)
            .unwrap()
            .vectors;

        let mut m2 = Matrix::zeros(dims[1], dims[1]);
        for i in 0..dims[2] {
            let s = slice(x, &[(2, i)]);
            let t = s.tr_mul(&a).unwrap();
            m2.add_aat(&t).unwrap();
        }
        for i in 0..dims[0] {
            let s = slice(x, &[(0, i)]);
            let t = s.mul(&c).unwrap();
            m2.add_aat(&t).unwrap();
        }
        b = factor_from_gram(m2.clone(), core_dims[1], style)
            .unwrap()
            .vectors;

        let mut m3 = Matrix::zeros(dims[2], dims[2]);
        for i in 0..dims[1] {
            let s = slice(x, &[(1, i)]);
            let t = s.tr_mul(&a).unwrap();
            m3.add_aat(&t).unwrap();
        }
        for i in 0..dims[0] {
            let s = slice(x, &[(0, i)]);
            let t = s.tr_mul(&b).unwrap();
            m3.add_aat(&t).unwrap();
        }
        c = factor_from_gram(m3.clone(), core_dims[2], style)
            .unwrap()
            .vectors;

        factors = vec![a.clone(), b.clone(), c.clone()];
        let core = project_all(x, &factors);
        let fit_now = dense_fit(x, &core, &factors);
        let done =
            fit_now - old_fit < cfg.fit_threshold || iterations.len() + 1 >= cfg.max_iterations;
        iterations.push(RefIteration {
            grams: vec![(0, m1), (1, m2), (2, m3)],
            core,
            metric: fit_now,
        });
        old_fit = fit_now;
        if done {
            break;
        }
    }
    let final_fit = iterations.last().unwrap().metric;
    RefTrace {
        init_grams,
        iterations,
        factors,
        final_fit,
    }
}

/// Multislice projection for fourth-order tensors, dense transcription.
pub fn ref_mp4(
    x: &DenseTensor,
    core_dims: &[usize],
    cfg: &ConvergenceConfig,
    style: GramStyle,
) -> RefTrace {
    let dims = x.dims();

    // Pseudo HO-SVD initialization for modes 1, 2, 3.
    let mut init_grams = Vec::new();
    let mut factors: Vec<Option<Matrix>> = vec![None; 4];
    // M2: fixed (2,3) transposed, fixed (0,3) direct, fixed (0,2) direct.
    let mut m2 = Matrix::zeros(dims[1], dims[1]);
    for i in 0..dims[2] {
        for j in 0..dims[3] {
            let s = slice(x, &[(2, i), (3, j)]);
            add_into(&mut m2, &s.tr_mul(&s).unwrap());
        }
    }
    for i in 0..dims[0] {
        for j in 0..dims[3] {
            let s = slice(x, &[(0, i), (3, j)]);
            add_into(&mut m2, &s.mul_tr(&s).unwrap());
        }
    }
    for i in 0..dims[0] {
        for j in 0..dims[2] {
            let s = slice(x, &[(0, i), (2, j)]);
            add_into(&mut m2, &s.mul_tr(&s).unwrap());
        }
    }
    init_grams.push((1, m2.clone()));
    factors[1] = Some(factor_from_gram(m2, core_dims[1], style).unwrap().vectors);

    let mut m3 = Matrix::zeros(dims[2], dims[2]);
    for i in 0..dims[1] {
        for j in 0..dims[3] {
            let s = slice(x, &[(1, i), (3, j)]);
            add_into(&mut m3, &s.tr_mul(&s).unwrap());
        }
    }
    for i in 0..dims[0] {
        for j in 0..dims[3] {
            let s = slice(x, &[(0, i), (3, j)]);
            add_into(&mut m3, &s.tr_mul(&s).unwrap());
        }
    }
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            let s = slice(x, &[(0, i), (1, j)]);
            add_into(&mut m3, &s.mul_tr(&s).unwrap());
        }
    }
    init_grams.push((2, m3.clone()));
    factors[2] = Some(factor_from_gram(m3, core_dims[2], style).unwrap().vectors);

    let mut m4 = Matrix::zeros(dims[3], dims[3]);
    for i in 0..dims[1] {
        for j in 0..dims[2] {
            let s = slice(x, &[(1, i), (2, j)]);
            add_into(&mut m4, &s.tr_mul(&s).unwrap());
        }
    }
    for i in 0..dims[0] {
        for j in 0..dims[2] {
            let s = slice(x, &[(0, i), (2, j)]);
            add_into(&mut m4, &s.tr_mul(&s).unwrap());
        }
    }
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            let s = slice(x, &[(0, i), (1, j)]);
            add_into(&mut m4, &s.tr_mul(&s).unwrap());
        }
    }
    init_grams.push((3, m4.clone()));
    factors[3] = Some(factor_from_gram(m4, core_dims[3], style).unwrap().vectors);

    let mut old_fit = 0.0;
    let mut iterations = Vec::new();
    let mut out_factors: Vec<Matrix>;
    loop {
        let mut iter_grams = Vec::new();
        for n in 0..4 {
            let mut m = Matrix::zeros(dims[n], dims[n]);
            for p in (0..4).filter(|&p| p != n) {
                let fp = factors[p].as_ref().unwrap().clone();
                let fixed: Vec<usize> = (0..4).filter(|&q| q != n && q != p).collect();
                for i in 0..dims[fixed[0]] {
                    for j in 0..dims[fixed[1]] {
                        let s = slice(x, &[(fixed[0], i), (fixed[1], j)]);
                        let t = if n < p {
                            s.mul(&fp).unwrap()
                        } else {
                            s.tr_mul(&fp).unwrap()
                        };
                        m.add_aat(&t).unwrap();
                    }
                }
            }
            iter_grams.push((n, m.clone()));
            factors[n] = Some(factor_from_gram(m, core_dims[n], style).unwrap().vectors);
        }
        out_factors = factors.iter().map(|f| f.clone().unwrap()).collect();
        let core = project_all(x, &out_factors);
        let fit_now = dense_fit(x, &core, &out_factors);
        let done =
            fit_now - old_fit < cfg.fit_threshold || iterations.len() + 1 >= cfg.max_iterations;
        iterations.push(RefIteration {
            grams: iter_grams,
            core,
            metric: fit_now,
        });
        old_fit = fit_now;
        if done {
            break;
        }
    }
    let final_fit = iterations.last().unwrap().metric;
    RefTrace {
        init_grams,
        iterations,
        factors: out_factors,
        final_fit,
    }
}

fn add_into(m: &mut Matrix, t: &Matrix) {
    for (slot, v) in m.values_mut().iter_mut().zip(t.values().iter()) {
        *slot += v;
    }
}

/// Random matrix with orthonormal columns.
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    for c in 0..cols {
        for prev in 0..c {
            let dot: f64 = m
                .col(c)
                .iter()
                .zip(m.col(prev).iter())
                .map(|(a, b)| a * b)
                .sum();
            let prev_col: Vec<f64> = m.col(prev).to_vec();
            for (v, p) in m.col_mut(c).iter_mut().zip(prev_col.iter()) {
                *v -= dot * p;
            }
        }
        let norm: f64 = m.col(c).iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in m.col_mut(c).iter_mut() {
            *v /= norm;
        }
    }
    m
}

/// Tensor with multilinear rank exactly `core_dims`.
pub fn synthetic_exact(dims: &[usize], core_dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = core_dims.iter().product();
    let g = DenseTensor::from_vec(
        core_dims.to_vec(),
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let factors: Vec<Matrix> = dims
        .iter()
        .zip(core_dims.iter())
        .enumerate()
        .map(|(m, (&i, &j))| random_orthonormal(i, j, seed.wrapping_add(101 + m as u64)))
        .collect();
    let refs: Vec<&Matrix> = factors.iter().collect();
    g.tucker_apply(&refs).unwrap()
}

/// Writes a dense tensor as a coordinate text file (all cells, 1-based).
pub fn write_dense_as_coo(x: &DenseTensor, path: &Path) -> CooFile {
    let dims = x.dims();
    let n = dims.len();
    let mut out = String::new();
    let total: usize = dims.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = Vec::with_capacity(n);
        for &d in dims {
            idx.push(rem % d);
            rem /= d;
        }
        let v = x.values()[flat];
        if v == 0.0 {
            continue;
        }
        for i in &idx {
            out.push_str(&format!("{} ", i + 1));
        }
        out.push_str(&format!("{}\n", v));
    }
    std::fs::write(path, out).unwrap();
    parse_coo(path, dims).unwrap()
}

/// Builds every store the out-of-core algorithms need under `root`.
pub fn build_stores(coo: &CooFile, root: &Path) -> StoreSet {
    let order = coo.dims.len();
    let mut axes: Vec<SliceAxes> = Vec::new();
    if order == 3 {
        for m in 0..3 {
            axes.push(SliceAxes::Mode(m));
        }
    } else {
        for a in 0..4 {
            for b in (a + 1)..4 {
                axes.push(SliceAxes::Pair(a, b));
            }
        }
    }
    let mut set = StoreSet::new();
    for ax in axes {
        let store =
            build_slice_store(coo, ax, &root.join(ax.label()), &BuildOptions::default()).unwrap();
        set.insert(store);
    }
    set
}

/// Temp-dir scoped paths for generated inputs.
pub struct TestTensor {
    pub dir: tempfile::TempDir,
    pub coo: CooFile,
    pub dense: DenseTensor,
    pub stores: StoreSet,
}

/// Random sparse tensor written to disk with its stores built and a dense
/// copy in RAM.
pub fn random_tensor_with_stores(dims: &[usize], density: f64, seed: u64) -> TestTensor {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    let coo = ooctucker::bench::gen_random_tensor(dims, density, seed, &path).unwrap();
    let tensor = ooctucker::coo::CooTensor::read(&coo).unwrap();
    let dense = tensor.to_dense().unwrap();
    let stores = build_stores(&coo, &dir.path().join("stores"));
    TestTensor {
        dir,
        coo,
        dense,
        stores,
    }
}

/// Compares a production run trace against a dense reference trace:
/// every Gram, core and metric within `tol` relative, same iteration count.
pub fn assert_trace_matches(
    got: &ooctucker::decomp::RunTrace,
    want_init: &[(usize, Matrix)],
    want_iters: &[RefIteration],
    tol: f64,
    label: &str,
) {
    assert_eq!(got.init_grams.len(), want_init.len(), "{label}: init grams");
    for ((gm, ga), (wm, wa)) in got.init_grams.iter().zip(want_init.iter()) {
        assert_eq!(gm, wm, "{label}: init gram mode");
        let d = relative_matrix_diff(ga, wa);
        assert!(d < tol, "{label}: init gram mode {gm} differs by {d:e}");
    }
    assert_eq!(
        got.iterations.len(),
        want_iters.len(),
        "{label}: iteration count"
    );
    for (t, (gi, wi)) in got.iterations.iter().zip(want_iters.iter()).enumerate() {
        assert_eq!(gi.grams.len(), wi.grams.len());
        for ((gm, ga), (wm, wa)) in gi.grams.iter().zip(wi.grams.iter()) {
            assert_eq!(gm, wm, "{label} iter {t}: gram mode");
            let d = relative_matrix_diff(ga, wa);
            assert!(d < tol, "{label} iter {t}: gram mode {gm} differs by {d:e}");
        }
        let d = relative_tensor_diff(&gi.core, &wi.core);
        assert!(d < tol, "{label} iter {t}: core differs by {d:e}");
        assert!(
            (gi.metric - wi.metric).abs() < tol,
            "{label} iter {t}: metric {} vs {}",
            gi.metric,
            wi.metric
        );
    }
}

pub fn relative_matrix_diff(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(1e-300);
    a.max_abs_diff(b) / scale
}

pub fn relative_tensor_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let scale = a
        .values()
        .iter()
        .chain(b.values().iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    a.max_abs_diff(b) / scale
}

pub fn workdir(prefix: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join(prefix);
    std::fs::create_dir_all(&p).unwrap();
    (dir, p)
}
