//! Helpers shared by the unit tests: seeded random orthonormal factors,
//! synthetic exact-rank tensors and random sparse tensors.

use crate::coo::CooTensor;
use crate::matrix::Matrix;
use crate::tensor::{DenseTensor, MAX_ORDER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random matrix with orthonormal columns (modified Gram-Schmidt of a
/// uniform random matrix).
pub(crate) fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> Matrix {
    assert!(cols <= rows);
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

/// `⟦g; F0, …⟧` with random core and random orthonormal factors: a tensor
/// whose multilinear rank is exactly `core_dims`.
pub(crate) fn synthetic_exact(dims: &[usize], core_dims: &[usize], seed: u64) -> DenseTensor {
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

/// Uniform random sparse tensor in RAM.
pub(crate) fn random_sparse(dims: &[usize], density: f64, seed: u64) -> CooTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for flat in 0..dims.iter().product::<usize>() {
        if rng.gen::<f64>() < density {
            let mut idx = [0u32; MAX_ORDER];
            let mut rem = flat;
            for (m, &d) in dims.iter().enumerate() {
                idx[m] = (rem % d) as u32;
                rem /= d;
            }
            entries.push((idx, rng.gen::<f64>()));
        }
    }
    CooTensor::from_entries(dims.to_vec(), &entries).unwrap()
}
