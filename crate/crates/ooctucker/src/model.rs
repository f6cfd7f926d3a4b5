//! Tucker decomposition container: a core tensor plus one orthonormal
//! factor matrix per mode.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

/// Orthonormality tolerance enforced on factor columns.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// A Tucker model `x ≈ ⟦core; F0, …, F(N-1)⟧`.
///
/// Factor `n` has shape `I_n x J_n` with `J_n <= I_n` and orthonormal
/// columns (defect at most [`ORTHONORMALITY_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    core: DenseTensor,
    factors: Vec<Matrix>,
}

impl TuckerModel {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::Shape(format!(
                "{} factors for an order-{} core",
                factors.len(),
                core.order()
            )));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.cols() != core.dims()[n] {
                return Err(Error::Shape(format!(
                    "factor {} has {} columns, core dimension is {}",
                    n,
                    f.cols(),
                    core.dims()[n]
                )));
            }
            if f.cols() > f.rows() {
                return Err(Error::Shape(format!(
                    "factor {} is {}x{}; a core dimension larger than the tensor dimension is invalid",
                    n,
                    f.rows(),
                    f.cols()
                )));
            }
            let defect = f.orthonormality_defect();
            if defect > ORTHONORMALITY_TOL {
                return Err(Error::Shape(format!(
                    "factor {} columns are not orthonormal (defect {:e})",
                    n, defect
                )));
            }
        }
        Ok(Self { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, n: usize) -> &Matrix {
        &self.factors[n]
    }

    pub fn order(&self) -> usize {
        self.core.order()
    }

    /// Original tensor dimensions `I_1 … I_N`.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn core_dims(&self) -> &[usize] {
        self.core.dims()
    }

    /// Dense reconstruction `⟦core; F0, …⟧`.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let refs: Vec<&Matrix> = self.factors.iter().collect();
        self.core.tucker_apply(&refs)
    }

    /// `‖x̂‖_F`; equals `‖core‖_F` because the factors are orthonormal.
    pub fn reconstruction_norm(&self) -> f64 {
        self.core.frobenius_norm()
    }
}
