//! The four Tucker decomposition drivers and their shared machinery.
//!
//! * [`ho_svd`]: one eigendecomposition per mode, no iteration.
//! * [`hooi`]: alternating least squares over an in-RAM tensor, each mode
//!   refined against all the others, change-in-fit stopping rule.
//! * [`slice_projection`]: out-of-core ALS streaming slices from a
//!   [`SliceStore`], one helper factor per update, core-growth stopping rule.
//! * [`multislice_projection`]: out-of-core ALS slicing on several modes,
//!   all other factors per update, slice-wise fit stopping rule.
//!
//! All four return a [`RunResult`] holding the model, the per-iteration
//! convergence metric and the termination reason.

mod container;
mod hooi;
mod hosvd;
mod input;
mod mp;
mod slicewise;
mod sp;

pub use container::{load_model, save_model, TKRD_MAGIC, TKRD_VERSION};
pub use hooi::hooi;
pub use hosvd::ho_svd;
pub use input::TensorInput;
pub use mp::multislice_projection;
pub use slicewise::{core_from_slices, fit_from_slices, fit_from_slices_parts};
pub use sp::slice_projection;

use crate::eig::GramStyle;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TuckerModel;
use crate::store::{SliceAxes, SliceStore};
use crate::tensor::DenseTensor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Stopping rules shared by the iterative drivers: strict `<` comparisons,
/// checked once per full sweep over the modes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Change-in-fit threshold for HOOI and MP.
    pub fit_threshold: f64,
    /// Core-growth threshold for SP.
    pub core_growth_threshold: f64,
    pub max_iterations: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            fit_threshold: 1e-4,
            core_growth_threshold: 1e-4,
            max_iterations: 50,
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fit_threshold <= 0.0 || self.core_growth_threshold <= 0.0 {
            return Err(Error::InvalidArgument(
                "convergence thresholds must be positive".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "at least one iteration is required".into(),
            ));
        }
        Ok(())
    }
}

/// Why a driver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminated {
    Threshold,
    MaxIterations,
}

/// Per-iteration observations captured when
/// [`DecompOptions::capture_trace`] is set: every Gram matrix in update
/// order, the core, and the iteration's convergence metric. Used by the
/// equivalence tests that replay a run densely.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// `(mode, gram)` pairs in the order the modes were updated.
    pub grams: Vec<(usize, Matrix)>,
    pub core: DenseTensor,
    /// Fit (HOOI, MP) or core growth (SP) after this sweep.
    pub metric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    /// Initialization Grams (MP's pseudo HO-SVD), `(mode, gram)`.
    pub init_grams: Vec<(usize, Matrix)>,
    pub iterations: Vec<IterationTrace>,
}

/// Outcome of one decomposition run.
#[derive(Debug)]
pub struct RunResult {
    pub model: TuckerModel,
    /// One value per iteration: fit for HOOI/MP, core growth for SP, and the
    /// single final fit for HO-SVD.
    pub fit_history: Vec<f64>,
    pub iterations: usize,
    pub terminated_by: Terminated,
    /// Fit of the returned model against the input.
    pub final_fit: f64,
    /// A requested core dimension exceeded the numerical n-rank somewhere,
    /// so factor columns were filled by the deterministic completion.
    pub rank_completed: bool,
    /// Some index of a sliced mode had no nonzeros at all.
    pub empty_slices: bool,
    pub trace: Option<RunTrace>,
}

/// Options common to the drivers.
#[derive(Debug, Clone, Default)]
pub struct DecompOptions {
    pub gram_style: GramStyle,
    /// Record Grams, cores and metrics per iteration (testing aid).
    pub capture_trace: bool,
    /// SP only: the mode update order, defaulting to `0..N`. Each update
    /// projects through the factor updated just before it (cyclically), so
    /// the order changes which slices each Gram walks.
    pub update_order: Option<Vec<usize>>,
}

/// Relative growth of the core norm, `1 − prev/curr`; SP's convergence
/// proxy. Errors if the current norm is zero.
pub fn delta_core_growth(prev_norm: f64, curr_norm: f64) -> Result<f64> {
    if curr_norm == 0.0 {
        return Err(Error::ZeroNorm("core growth denominator".into()));
    }
    Ok(1.0 - prev_norm / curr_norm)
}

/// Seeded random factor: uniform `[0,1)` entries, columns normalized to unit
/// length. This is SP's last-factor initialization.
pub fn random_factor(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(rows, cols);
    // Row-major fill so the stream order matches reading the matrix.
    for r in 0..rows {
        for c in 0..cols {
            m.set(r, c, rng.gen::<f64>());
        }
    }
    for c in 0..cols {
        let col = m.col_mut(c);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in col.iter_mut() {
                *v /= norm;
            }
        }
    }
    m
}

/// The slice stores one out-of-core run needs, keyed by their axes.
#[derive(Debug, Default)]
pub struct StoreSet {
    stores: HashMap<SliceAxes, SliceStore>,
}

impl StoreSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, store: SliceStore) {
        self.stores.insert(store.axes(), store);
    }

    pub fn get(&self, axes: SliceAxes) -> Result<&SliceStore> {
        self.stores
            .get(&axes)
            .ok_or_else(|| Error::MissingStore(axes.label()))
    }

    pub fn contains(&self, axes: SliceAxes) -> bool {
        self.stores.contains_key(&axes)
    }

    /// Dimensions recorded by the stores; errors if they disagree.
    pub fn dims(&self) -> Result<Vec<usize>> {
        let mut dims: Option<Vec<usize>> = None;
        for s in self.stores.values() {
            match &dims {
                None => dims = Some(s.dims().to_vec()),
                Some(d) if d.as_slice() == s.dims() => {}
                Some(_) => {
                    return Err(Error::Shape(
                        "slice stores disagree about tensor dimensions".into(),
                    ))
                }
            }
        }
        dims.ok_or_else(|| Error::MissingStore("any".into()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &SliceStore> {
        self.stores.values()
    }

    pub fn any_empty_slice(&self) -> bool {
        self.stores.values().any(|s| s.has_empty_slice())
    }

    /// Total squared norm of the tensor, taken from any store.
    pub fn sq_norm(&self) -> Result<f64> {
        self.stores
            .values()
            .next()
            .map(|s| s.sq_norm())
            .ok_or_else(|| Error::MissingStore("any".into()))
    }
}

/// The axes of the store that fixes every mode of `order` except `n` and
/// `p`.
pub fn axes_fixing_all_but(order: usize, n: usize, p: usize) -> SliceAxes {
    let fixed: Vec<usize> = (0..order).filter(|&m| m != n && m != p).collect();
    match fixed.as_slice() {
        [a] => SliceAxes::Mode(*a),
        [a, b] => SliceAxes::Pair(*a, *b),
        _ => unreachable!("orders outside 3..=4 are rejected earlier"),
    }
}

/// Axes of the store used for slice-wise cores and fits: mode 0 for order 3,
/// the (0, 1) pair for order 4.
pub fn core_axes(order: usize) -> SliceAxes {
    if order == 3 {
        SliceAxes::Mode(0)
    } else {
        SliceAxes::Pair(0, 1)
    }
}

/// Fit of a projected model from norms alone: when the factors are
/// orthonormal and the core is the projection of `x`, the reconstruction
/// satisfies `⟨x, x̂⟩ = ‖core‖²`, so
/// `‖x − x̂‖² = ‖x‖² − ‖core‖²`. Used by the in-RAM drivers to avoid
/// materializing the reconstruction; equivalence with the dense fit is
/// covered by tests.
pub(crate) fn fit_from_norms(x_sq_norm: f64, core_sq_norm: f64) -> Result<f64> {
    if x_sq_norm == 0.0 {
        return Err(Error::ZeroNorm("fit denominator".into()));
    }
    let err_sq = (x_sq_norm - core_sq_norm).max(0.0);
    Ok(1.0 - (err_sq / x_sq_norm).sqrt())
}

/// Validates requested core dimensions against the tensor dimensions.
pub(crate) fn check_core_dims(dims: &[usize], core_dims: &[usize]) -> Result<()> {
    if core_dims.len() != dims.len() {
        return Err(Error::Shape(format!(
            "{} core dimensions for an order-{} tensor",
            core_dims.len(),
            dims.len()
        )));
    }
    for (n, (&j, &i)) in core_dims.iter().zip(dims.iter()).enumerate() {
        if j == 0 {
            return Err(Error::Shape(format!("core dimension {} is zero", n)));
        }
        if j > i {
            return Err(Error::Shape(format!(
                "core dimension {} exceeds tensor dimension in mode {} ({} > {})",
                j, n, j, i
            )));
        }
    }
    Ok(())
}
