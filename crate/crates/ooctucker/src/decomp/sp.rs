//! Slice projection: out-of-core ALS with one helper factor per update.
//!
//! The last factor in the update order starts as a seeded random matrix with
//! unit-length columns; no other initialization is needed. Each update of
//! mode `n` walks the store that slices on the remaining mode(s) and
//! accumulates
//!
//! ```text
//! M ← Σ_slices  (S F_p)(S F_p)ᵀ
//! ```
//!
//! where `S` is the slice oriented with mode `n` as rows and the previously
//! updated mode `p` as columns, then takes leading eigenvectors of `M`. The
//! sweep ends by contracting the core slice-wise; the loop stops when the
//! core's relative norm growth `1 − ‖G⁽ᵗ⁻¹⁾‖/‖G⁽ᵗ⁾‖` falls below the
//! threshold (a cheap proxy for the change in fit, since the tensor never
//! sits in RAM).
//!
//! The update order is configurable; it defaults to mode order, which makes
//! mode `n` lean on the factor of its cyclic predecessor exactly as the
//! fixed scheme prescribes. The order matters for strongly skewed cores.

use super::{
    axes_fixing_all_but, check_core_dims, core_axes, core_from_slices, delta_core_growth,
    random_factor, ConvergenceConfig, DecompOptions, IterationTrace, RunResult, RunTrace, StoreSet,
    Terminated,
};
use crate::eig::factor_from_gram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TuckerModel;

/// SP over slice stores (orders 3 and 4). `seed` drives the random
/// initialization of the last factor in the update order.
pub fn slice_projection(
    stores: &StoreSet,
    core_dims: &[usize],
    cfg: &ConvergenceConfig,
    seed: u64,
    opts: &DecompOptions,
) -> Result<RunResult> {
    let dims = stores.dims()?;
    let order = dims.len();
    if !(3..=4).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    check_core_dims(&dims, core_dims)?;
    cfg.validate()?;
    let sq_norm = stores.sq_norm()?;
    if sq_norm == 0.0 {
        return Err(Error::ZeroNorm("cannot decompose the zero tensor".into()));
    }

    let update_order: Vec<usize> = match &opts.update_order {
        Some(p) => {
            let mut seen = vec![false; order];
            if p.len() != order
                || p.iter()
                    .any(|&m| m >= order || std::mem::replace(&mut seen[m], true))
            {
                return Err(Error::InvalidArgument(format!(
                    "update order {:?} is not a permutation of 0..{}",
                    p, order
                )));
            }
            p.clone()
        }
        None => (0..order).collect(),
    };

    let core_store = stores.get(core_axes(order))?;

    let mut factors: Vec<Option<Matrix>> = vec![None; order];
    let init_mode = *update_order.last().expect("non-empty order");
    factors[init_mode] = Some(random_factor(dims[init_mode], core_dims[init_mode], seed));

    let mut trace = opts.capture_trace.then(RunTrace::default);
    let mut history = Vec::new();
    let mut prev_norm = 0.0f64;
    let mut terminated_by = Terminated::MaxIterations;
    let mut rank_completed = false;
    let mut last_core = None;

    for _ in 0..cfg.max_iterations {
        let mut iter_grams = Vec::new();
        for (k, &n) in update_order.iter().enumerate() {
            let p = update_order[(k + order - 1) % order];
            let store = stores.get(axes_fixing_all_but(order, n, p))?;
            let fp = factors[p].as_ref().expect("predecessor factor available");
            let mut m = Matrix::zeros(dims[n], dims[n]);
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
            if trace.is_some() {
                iter_grams.push((n, m.clone()));
            }
            let eig = factor_from_gram(m, core_dims[n], opts.gram_style)?;
            rank_completed |= eig.completed > 0;
            factors[n] = Some(eig.vectors);
        }

        let refs: Vec<&Matrix> = factors
            .iter()
            .map(|f| f.as_ref().expect("all factors set after a sweep"))
            .collect();
        let core = core_from_slices(core_store, &refs)?;
        let norm = core.frobenius_norm();
        let growth = delta_core_growth(prev_norm, norm)?;
        history.push(growth);
        if let Some(t) = trace.as_mut() {
            t.iterations.push(IterationTrace {
                grams: std::mem::take(&mut iter_grams),
                core: core.clone(),
                metric: growth,
            });
        }
        last_core = Some(core);

        if growth < cfg.core_growth_threshold {
            terminated_by = Terminated::Threshold;
            break;
        }
        prev_norm = norm;
    }

    let core = last_core.expect("at least one sweep ran");
    let refs: Vec<&Matrix> = factors
        .iter()
        .map(|f| f.as_ref().expect("factor"))
        .collect();
    // Accurate slice-wise fit for reporting; the loop itself never needed
    // one (core growth is the stopping rule).
    let final_fit = super::fit_from_slices_parts(core_store, &core, &refs)?;
    let model = TuckerModel::new(
        core,
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
