//! Core contraction and fit evaluation that stream slices from a store
//! instead of materializing the tensor.
//!
//! Both walk the canonical store (mode 0 for third order, the (0, 1) pair
//! for fourth order) one slice at a time. For a slice at index `i` of mode
//! 0 the core receives `A[i,:] ⊗ (Bᵀ S C)`, and the fit accumulates
//! `‖S − X̂_i‖²` against the slice's reconstruction, exactly the dense
//! formula `1 − ‖x − x̂‖/‖x‖` rearranged per slice.

use super::core_axes;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TuckerModel;
use crate::store::SliceStore;
use crate::tensor::DenseTensor;

fn check_store_and_factors(store: &SliceStore, factors: &[&Matrix]) -> Result<()> {
    let dims = store.dims();
    let order = dims.len();
    if store.axes() != core_axes(order) {
        return Err(Error::InvalidArgument(format!(
            "slice-wise core/fit needs the {} store, got {}",
            core_axes(order).label(),
            store.axes().label()
        )));
    }
    if factors.len() != order {
        return Err(Error::Shape(format!(
            "{} factors for an order-{} store",
            factors.len(),
            order
        )));
    }
    for (m, f) in factors.iter().enumerate() {
        if f.rows() != dims[m] {
            return Err(Error::Shape(format!(
                "factor {} has {} rows, mode size is {}",
                m,
                f.rows(),
                dims[m]
            )));
        }
        if f.cols() > f.rows() {
            return Err(Error::Shape(format!(
                "factor {} has more columns than rows",
                m
            )));
        }
    }
    Ok(())
}

/// `⟦x; F0ᵀ, …⟧` accumulated slice by slice; never holds more than the core,
/// one slice and one slice-sized intermediate.
pub fn core_from_slices(store: &SliceStore, factors: &[&Matrix]) -> Result<DenseTensor> {
    check_store_and_factors(store, factors)?;
    let dims = store.dims();
    let order = dims.len();
    let core_dims: Vec<usize> = factors.iter().map(|f| f.cols()).collect();
    let mut core = DenseTensor::zeros(core_dims.clone())?;

    if order == 3 {
        let (a, b, c) = (factors[0], factors[1], factors[2]);
        let j0 = a.cols();
        for i in 0..dims[0] {
            let s = store.load_slice(i)?;
            // W = Bᵀ S C, shaped J1 x J2.
            let stb = s.tr_mul_dense(b)?;
            let w = stb.tr_mul(c)?;
            // core[p, :, :] += A[i, p] * W; the (q, r) block of the core at
            // fixed p is strided by J0 in the flat buffer.
            let g = core.values_mut();
            for p in 0..j0 {
                let weight = a.get(i, p);
                if weight == 0.0 {
                    continue;
                }
                for (t, &wv) in w.values().iter().enumerate() {
                    g[p + j0 * t] += weight * wv;
                }
            }
        }
    } else {
        let (a, b, c, d) = (factors[0], factors[1], factors[2], factors[3]);
        let (j0, j1) = (a.cols(), b.cols());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let s = store.load_slice(store.seq_of_pair(i, j))?;
                // W = Cᵀ S D, shaped J2 x J3.
                let stc = s.tr_mul_dense(c)?;
                let w = stc.tr_mul(d)?;
                let g = core.values_mut();
                for q in 0..j1 {
                    let wb = b.get(j, q);
                    if wb == 0.0 {
                        continue;
                    }
                    for p in 0..j0 {
                        let weight = a.get(i, p) * wb;
                        if weight == 0.0 {
                            continue;
                        }
                        let base = p + j0 * q;
                        for (t, &wv) in w.values().iter().enumerate() {
                            g[base + j0 * j1 * t] += weight * wv;
                        }
                    }
                }
            }
        }
    }
    Ok(core)
}

/// Fit of an arbitrary model against the stored tensor, slice by slice:
/// accumulates `‖X_i − X̂_i‖²` and `‖X_i‖²`, then `1 − √sqerr / √normx`.
/// Works for models that are not projections (e.g. a zeroed core), so the
/// result may be negative. Errors on a zero-norm tensor.
pub fn fit_from_slices(store: &SliceStore, model: &TuckerModel) -> Result<f64> {
    let refs: Vec<&Matrix> = model.factors().iter().collect();
    fit_from_slices_parts(store, model.core(), &refs)
}

/// As [`fit_from_slices`], taking the model in parts.
pub fn fit_from_slices_parts(
    store: &SliceStore,
    core: &DenseTensor,
    factors: &[&Matrix],
) -> Result<f64> {
    check_store_and_factors(store, factors)?;
    let dims = store.dims();
    let order = dims.len();
    for (m, f) in factors.iter().enumerate() {
        if f.cols() != core.dims()[m] {
            return Err(Error::Shape(format!(
                "factor {} has {} columns, core dimension is {}",
                m,
                f.cols(),
                core.dims()[m]
            )));
        }
    }

    let mut sqerr = 0.0f64;
    let mut normx = 0.0f64;

    if order == 3 {
        let (a, b, c) = (factors[0], factors[1], factors[2]);
        let (j0, j1, j2) = (a.cols(), b.cols(), c.cols());
        for i in 0..dims[0] {
            let s = store.load_slice(i)?;
            // G_i = sum_p A[i,p] core[p,:,:], shaped J1 x J2.
            let mut gi = Matrix::zeros(j1, j2);
            let g = core.values();
            for p in 0..j0 {
                let weight = a.get(i, p);
                if weight == 0.0 {
                    continue;
                }
                for (t, slot) in gi.values_mut().iter_mut().enumerate() {
                    *slot += weight * g[p + j0 * t];
                }
            }
            // X̂_i = B G_i Cᵀ, dense I1 x I2.
            let mut recon = b.mul(&gi)?.mul_tr(c)?;
            normx += s.sq_norm();
            for (r, cidx, v) in s.iter() {
                let cur = recon.get(r, cidx);
                recon.set(r, cidx, cur - v);
            }
            sqerr += recon.values().iter().map(|v| v * v).sum::<f64>();
        }
    } else {
        let (a, b, c, d) = (factors[0], factors[1], factors[2], factors[3]);
        let (j0, j1, j2, j3) = (a.cols(), b.cols(), c.cols(), d.cols());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let s = store.load_slice(store.seq_of_pair(i, j))?;
                let mut gij = Matrix::zeros(j2, j3);
                let g = core.values();
                for q in 0..j1 {
                    let wb = b.get(j, q);
                    if wb == 0.0 {
                        continue;
                    }
                    for p in 0..j0 {
                        let weight = a.get(i, p) * wb;
                        if weight == 0.0 {
                            continue;
                        }
                        let base = p + j0 * q;
                        for (t, slot) in gij.values_mut().iter_mut().enumerate() {
                            *slot += weight * g[base + j0 * j1 * t];
                        }
                    }
                }
                let mut recon = c.mul(&gij)?.mul_tr(d)?;
                normx += s.sq_norm();
                for (r, cidx, v) in s.iter() {
                    let cur = recon.get(r, cidx);
                    recon.set(r, cidx, cur - v);
                }
                sqerr += recon.values().iter().map(|v| v * v).sum::<f64>();
            }
        }
    }

    if normx == 0.0 {
        return Err(Error::ZeroNorm("fit denominator".into()));
    }
    Ok(1.0 - sqerr.sqrt() / normx.sqrt())
}
