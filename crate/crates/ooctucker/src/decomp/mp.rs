//! Multislice projection: out-of-core ALS slicing on multiple modes.
//!
//! MP keeps SP's streaming structure but borrows three ideas from HOOI:
//! initialization approximating HO-SVD, fit as the stopping rule, and every
//! other factor participating in each update.
//!
//! The *pseudo HO-SVD* initialization of mode `n` accumulates, over each
//! partner mode `p ≠ n`, the plain Gram of every slice oriented with `n` as
//! rows: an `I_n x I_n` matrix built one slice at a time, where true HO-SVD
//! would unfold the whole tensor. The main loop replaces the plain Grams
//! with projected ones, `(S F_p)(S F_p)ᵀ`, summed over all partners. After
//! each sweep the core is contracted slice-wise and the fit evaluated
//! slice-wise; the loop stops when the change in fit drops below the
//! threshold (starting from zero, so a drop in fit stops immediately) or at
//! the iteration cap.

use super::{
    axes_fixing_all_but, check_core_dims, core_axes, core_from_slices, fit_from_slices_parts,
    ConvergenceConfig, DecompOptions, IterationTrace, RunResult, RunTrace, StoreSet, Terminated,
};
use crate::eig::factor_from_gram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TuckerModel;

/// MP over slice stores (orders 3 and 4). Deterministic: no random
/// initialization anywhere.
pub fn multislice_projection(
    stores: &StoreSet,
    core_dims: &[usize],
    cfg: &ConvergenceConfig,
    opts: &DecompOptions,
) -> Result<RunResult> {
    let dims = stores.dims()?;
    let order = dims.len();
    if !(3..=4).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    check_core_dims(&dims, core_dims)?;
    cfg.validate()?;
    if stores.sq_norm()? == 0.0 {
        return Err(Error::ZeroNorm("cannot decompose the zero tensor".into()));
    }

    let core_store = stores.get(core_axes(order))?;
    let mut trace = opts.capture_trace.then(RunTrace::default);
    let mut rank_completed = false;

    // Pseudo HO-SVD initialization: modes 1..N from unprojected slice Grams.
    let mut factors: Vec<Option<Matrix>> = vec![None; order];
    for n in 1..order {
        let mut m = Matrix::zeros(dims[n], dims[n]);
        for p in (0..order).filter(|&p| p != n) {
            let store = stores.get(axes_fixing_all_but(order, n, p))?;
            for seq in 0..store.num_slices() {
                let s = store.load_slice(seq)?;
                if n < p {
                    s.add_gram_rows(&mut m)?;
                } else {
                    s.add_gram_cols(&mut m)?;
                }
            }
        }
        if let Some(t) = trace.as_mut() {
            t.init_grams.push((n, m.clone()));
        }
        let eig = factor_from_gram(m, core_dims[n], opts.gram_style)?;
        rank_completed |= eig.completed > 0;
        factors[n] = Some(eig.vectors);
    }

    let mut history = Vec::new();
    let mut prev_fit = 0.0f64;
    let mut terminated_by = Terminated::MaxIterations;
    let mut last_core = None;

    for _ in 0..cfg.max_iterations {
        let mut iter_grams = Vec::new();
        for n in 0..order {
            let mut m = Matrix::zeros(dims[n], dims[n]);
            for p in (0..order).filter(|&p| p != n) {
                let store = stores.get(axes_fixing_all_but(order, n, p))?;
                let fp = factors[p].as_ref().expect("partner factor");
                for seq in 0..store.num_slices() {
                    let s = store.load_slice(seq)?;
                    let t = if n < p {
                        s.mul_dense(fp)?
                    } else {
                        s.tr_mul_dense(fp)?
                    };
                    drop(s);
                    m.add_aat(&t)?;
                }
            }
            if trace.is_some() {
                iter_grams.push((n, m.clone()));
            }
            let eig = factor_from_gram(m, core_dims[n], opts.gram_style)?;
            rank_completed |= eig.completed > 0;
            factors[n] = Some(eig.vectors);
        }

        let refs: Vec<&Matrix> = factors
            .iter()
            .map(|f| f.as_ref().expect("all factors set"))
            .collect();
        let core = core_from_slices(core_store, &refs)?;
        let fit = fit_from_slices_parts(core_store, &core, &refs)?;
        history.push(fit);
        if let Some(t) = trace.as_mut() {
            t.iterations.push(IterationTrace {
                grams: std::mem::take(&mut iter_grams),
                core: core.clone(),
                metric: fit,
            });
        }
        last_core = Some(core);

        if fit - prev_fit < cfg.fit_threshold {
            terminated_by = Terminated::Threshold;
            break;
        }
        prev_fit = fit;
    }

    let final_fit = *history.last().expect("at least one sweep");
    let model = TuckerModel::new(
        last_core.expect("core computed"),
        factors.into_iter().map(|f| f.expect("factor")).collect(),
    )?;

    Ok(RunResult {
        model,
        iterations: history.len(),
        fit_history: history,
        terminated_by,
        final_fit,
        rank_completed,
        empty_slices: stores.any_empty_slice(),
        trace,
    })
}
