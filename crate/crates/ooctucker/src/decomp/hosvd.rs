//! Higher-order SVD: each factor is taken from the leading eigenvectors of
//! its mode Gram, independently of the other modes, then the core is the
//! projection of the input. No iteration and no fit optimization: the
//! per-mode subspaces are optimal separately but not jointly.

use super::{check_core_dims, DecompOptions, RunResult, TensorInput, Terminated};
use crate::eig::factor_from_gram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TuckerModel;

/// HO-SVD of an in-RAM tensor (orders 2 to 4).
pub fn ho_svd(x: TensorInput, core_dims: &[usize], opts: &DecompOptions) -> Result<RunResult> {
    let dims = x.dims().to_vec();
    check_core_dims(&dims, core_dims)?;
    let sq_norm = x.sq_norm();
    if sq_norm == 0.0 {
        return Err(Error::ZeroNorm("cannot decompose the zero tensor".into()));
    }

    let n = dims.len();
    let mut factors: Vec<Matrix> = Vec::with_capacity(n);
    let mut rank_completed = false;
    for mode in 0..n {
        let gram = x.mode_gram(mode)?;
        let eig = factor_from_gram(gram, core_dims[mode], opts.gram_style)?;
        rank_completed |= eig.completed > 0;
        factors.push(eig.vectors);
    }

    let refs: Vec<Option<&Matrix>> = factors.iter().map(Some).collect();
    let core = x.project_transposed(&refs)?;
    let fit = x.residual_fit(&core, &factors)?;
    let model = TuckerModel::new(core, factors)?;

    Ok(RunResult {
        model,
        fit_history: vec![fit],
        iterations: 1,
        terminated_by: Terminated::Threshold,
        final_fit: fit,
        rank_completed,
        empty_slices: false,
        trace: None,
    })
}
