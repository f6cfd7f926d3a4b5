//! Input abstraction for the in-RAM drivers: HO-SVD and HOOI accept either a
//! dense tensor or coordinate records, and only ever ask for mode Grams,
//! multilinear projections and the squared norm.

use crate::coo::CooTensor;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

/// A tensor already resident in RAM.
#[derive(Debug, Clone, Copy)]
pub enum TensorInput<'a> {
    Dense(&'a DenseTensor),
    Sparse(&'a CooTensor),
}

impl<'a> TensorInput<'a> {
    pub fn dims(&self) -> &[usize] {
        match self {
            TensorInput::Dense(x) => x.dims(),
            TensorInput::Sparse(x) => x.dims(),
        }
    }

    pub fn order(&self) -> usize {
        self.dims().len()
    }

    pub fn sq_norm(&self) -> f64 {
        match self {
            TensorInput::Dense(x) => x.sq_norm(),
            TensorInput::Sparse(x) => x.sq_norm(),
        }
    }

    /// `X_(n) X_(n)ᵀ`. The sparse route accumulates fiber outer products
    /// without unfolding.
    pub fn mode_gram(&self, mode: usize) -> Result<Matrix> {
        match self {
            TensorInput::Dense(x) => {
                let unfolded = x.matricize(mode)?;
                unfolded.mul_tr(&unfolded)
            }
            TensorInput::Sparse(x) => x.mode_gram(mode),
        }
    }

    /// `⟦x; F0ᵀ, …⟧` with identity in the `None` modes.
    pub fn project_transposed(&self, factors: &[Option<&Matrix>]) -> Result<DenseTensor> {
        match self {
            TensorInput::Dense(x) => x.project_transposed(factors),
            TensorInput::Sparse(x) => x.project_transposed(factors),
        }
    }

    /// Fit of a model against this tensor by direct residual accumulation,
    /// one mode-0 slice of the reconstruction at a time.
    ///
    /// The cheap route `‖x − x̂‖² = ‖x‖² − ‖core‖²` cancels catastrophically
    /// near fit 1 (half the significant digits are rounding noise), so the
    /// reported fit is accumulated pointwise instead. Memory stays at one
    /// dense slice of the reconstruction.
    pub fn residual_fit(&self, core: &DenseTensor, factors: &[Matrix]) -> Result<f64> {
        match self {
            TensorInput::Dense(x) => {
                let refs: Vec<&Matrix> = factors.iter().collect();
                let xhat = core.tucker_apply(&refs)?;
                crate::tensor::fit(x, &xhat)
            }
            TensorInput::Sparse(x) => sparse_residual_fit(x, core, factors),
        }
    }
}

fn sparse_residual_fit(x: &CooTensor, core: &DenseTensor, factors: &[Matrix]) -> Result<f64> {
    use crate::error::Error;

    let dims = x.dims();
    let n = dims.len();
    if factors.len() != n || core.order() != n {
        return Err(Error::Shape("model order mismatch".into()));
    }
    for (m, f) in factors.iter().enumerate() {
        if f.rows() != dims[m] || f.cols() != core.dims()[m] {
            return Err(Error::Shape(format!(
                "factor {} is {}x{}, expected {}x{}",
                m,
                f.rows(),
                f.cols(),
                dims[m],
                core.dims()[m]
            )));
        }
    }
    let normx = x.sq_norm();
    if normx == 0.0 {
        return Err(Error::ZeroNorm("fit denominator".into()));
    }

    // Bucket the nonzeros by their mode-0 index.
    let mut counts = vec![0usize; dims[0]];
    for (idx, _) in x.iter() {
        counts[idx[0] as usize] += 1;
    }
    let mut starts = vec![0usize; dims[0] + 1];
    for i in 0..dims[0] {
        starts[i + 1] = starts[i] + counts[i];
    }
    let mut order: Vec<u32> = vec![0; x.nnz()];
    let mut cursor = starts.clone();
    for (r, (idx, _)) in x.iter().enumerate() {
        let slot = idx[0] as usize;
        order[cursor[slot]] = r as u32;
        cursor[slot] += 1;
    }
    let records: Vec<(&[u32], f64)> = x.iter().collect();

    let j0 = core.dims()[0];
    let core_rest: Vec<usize> = core.dims()[1..].to_vec();
    let rest_len: usize = core_rest.iter().product();
    let mut sqerr = 0.0f64;

    if n == 2 {
        // X̂ = F0 G F1ᵀ, one row at a time.
        let g_mat = Matrix::from_col_major(j0, rest_len, core.values().to_vec())?;
        let f1t = factors[1].transpose();
        for i in 0..dims[0] {
            let mut row = vec![0.0f64; rest_len];
            for p in 0..j0 {
                let w = factors[0].get(i, p);
                if w == 0.0 {
                    continue;
                }
                for (t, slot) in row.iter_mut().enumerate() {
                    *slot += w * g_mat.get(p, t);
                }
            }
            // x̂[i, c] = Σ_t row[t] F1[c, t]
            let mut recon = vec![0.0f64; dims[1]];
            for (t, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (c, slot) in recon.iter_mut().enumerate() {
                    *slot += w * f1t.get(t, c);
                }
            }
            for &r in &order[starts[i]..starts[i + 1]] {
                let (idx, v) = records[r as usize];
                recon[idx[1] as usize] -= v;
            }
            sqerr += recon.iter().map(|v| v * v).sum::<f64>();
        }
    } else {
        let rest_factors: Vec<&Matrix> = factors[1..].iter().collect();
        let mut strides = vec![0usize; n];
        {
            let mut acc = 1usize;
            for m in 1..n {
                strides[m] = acc;
                acc *= dims[m];
            }
        }
        for i in 0..dims[0] {
            // G_i = Σ_p F0[i,p] core[p, ...], an order-(n-1) tensor.
            let mut gi = vec![0.0f64; rest_len];
            let g = core.values();
            for p in 0..j0 {
                let w = factors[0].get(i, p);
                if w == 0.0 {
                    continue;
                }
                for (t, slot) in gi.iter_mut().enumerate() {
                    *slot += w * g[p + j0 * t];
                }
            }
            let gi = DenseTensor::from_vec(core_rest.clone(), gi)?;
            let mut recon = gi.tucker_apply(&rest_factors)?;
            let data = recon.values_mut();
            for &r in &order[starts[i]..starts[i + 1]] {
                let (idx, v) = records[r as usize];
                let mut off = 0usize;
                for m in 1..n {
                    off += idx[m] as usize * strides[m];
                }
                data[off] -= v;
            }
            sqerr += data.iter().map(|v| v * v).sum::<f64>();
        }
    }

    Ok(1.0 - sqerr.sqrt() / normx.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::MAX_ORDER;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_and_sparse_routes_agree() {
        let dims = vec![5usize, 6, 7];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut entries = Vec::new();
        for flat in 0..dims.iter().product::<usize>() {
            if rng.gen::<f64>() < 0.3 {
                let mut idx = [0u32; MAX_ORDER];
                let mut rem = flat;
                for (m, &d) in dims.iter().enumerate() {
                    idx[m] = (rem % d) as u32;
                    rem /= d;
                }
                entries.push((idx, rng.gen::<f64>()));
            }
        }
        let sparse = CooTensor::from_entries(dims.clone(), &entries).unwrap();
        let dense = sparse.to_dense().unwrap();
        let a = TensorInput::Sparse(&sparse);
        let b = TensorInput::Dense(&dense);

        assert!((a.sq_norm() - b.sq_norm()).abs() < 1e-12);
        for mode in 0..3 {
            let ga = a.mode_gram(mode).unwrap();
            let gb = b.mode_gram(mode).unwrap();
            assert!(ga.max_abs_diff(&gb) < 1e-12 * gb.max_abs().max(1.0));
        }

        let f1 = Matrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0));
        let pa = a.project_transposed(&[None, Some(&f1), None]).unwrap();
        let pb = b.project_transposed(&[None, Some(&f1), None]).unwrap();
        assert!(pa.max_abs_diff(&pb) < 1e-12);
    }
}
